// Copyright (c) 2026 The tagstyle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Include first in every test file. libtorch defines a CHECK macro of its
// own; pulling torch in before doctest and dropping that definition keeps
// CHECK pointing at doctest everywhere.

#ifndef TAGSTYLE_TESTS_TESTING_H_
#define TAGSTYLE_TESTS_TESTING_H_

#include <torch/torch.h>

#undef CHECK
#include "doctest.h"

#endif  // TAGSTYLE_TESTS_TESTING_H_
