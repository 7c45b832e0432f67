/*
   Copyright 2026 The mfres Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Umbrella header for the numerical core (no JSON or CLI dependencies).

#include "mfres/control.hpp"
#include "mfres/error.hpp"
#include "mfres/fpk.hpp"
#include "mfres/law.hpp"
#include "mfres/measures.hpp"
#include "mfres/model.hpp"
#include "mfres/objective.hpp"
#include "mfres/parallel.hpp"
#include "mfres/rng.hpp"
#include "mfres/sde.hpp"
#include "mfres/stats.hpp"
#include "mfres/trainer.hpp"
#include "mfres/tridiag.hpp"
