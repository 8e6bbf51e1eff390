/*
Copyright 2026 The powercap Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include "powercap/bench.hpp"
#include "powercap/capper.hpp"
#include "powercap/config.hpp"
#include "powercap/controller.hpp"
#include "powercap/errors.hpp"
#include "powercap/model.hpp"
#include "powercap/policies.hpp"
#include "powercap/random.hpp"
#include "powercap/report.hpp"
#include "powercap/simulator.hpp"
#include "powercap/workload.hpp"
