/*
 * Copyright 2026 SLLEN Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <vector>

namespace sllen {

// Grouped bar chart written as a PNG. One cluster per group, one bar per
// series inside the cluster. Bars are scaled per series (each series' peak
// fills the plot height) because the metrics live on very different scales;
// the raw value is printed above every bar.
void save_bar_plot(const std::string& path, const std::string& title,
                   const std::vector<std::string>& groups, const std::vector<std::string>& series,
                   const std::vector<std::vector<double>>& values);  // values[group][series]

}  // namespace sllen
