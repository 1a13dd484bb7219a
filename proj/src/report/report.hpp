// Copyright 2026 The lipscert Authors.
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
#pragma once

#include <string>
#include <vector>

#include "model/train.hpp"

namespace lipscert {

/// Parses a metrics CSV as written by write_metrics_csv. Throws ConfigError on
/// a wrong header, a malformed row or when there are no data rows.
std::vector<StepMetrics> parse_metrics_csv(const std::string& text);

/// Two stacked line charts (loss above, max activation below) as a
/// self-contained SVG document. Identical input gives identical bytes.
/// A row whose value is not finite, or whose nan_flag is set, breaks the
/// polyline and is drawn as a red cross on the panel's top edge.
std::string render_metrics_svg(const std::vector<StepMetrics>& rows);

}  // namespace lipscert
