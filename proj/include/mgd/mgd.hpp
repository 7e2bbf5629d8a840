// Copyright 2026 The MGD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mgd/align.hpp"
#include "mgd/appearance.hpp"
#include "mgd/error.hpp"
#include "mgd/evaluate.hpp"
#include "mgd/external_backend.hpp"
#include "mgd/imgproc.hpp"
#include "mgd/io.hpp"
#include "mgd/mfe.hpp"
#include "mgd/pipeline.hpp"
#include "mgd/synth.hpp"
#include "mgd/track.hpp"
#include "mgd/trajfilter.hpp"
