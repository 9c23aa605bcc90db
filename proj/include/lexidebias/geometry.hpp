// Copyright 2026 The lexidebias Authors
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

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "lexidebias/error.hpp"

namespace lexidebias {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Cosine similarity, clamped to [-1, 1]. Throws NumericError on a zero
/// vector and DataError on a length mismatch.
inline double cosine(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  if (u.size() != v.size()) throw DataError("cosine: length mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw NumericError("cosine: zero-length vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

inline Vector normalized(const Eigen::Ref<const Vector>& v) {
  const double n = v.norm();
  if (n == 0.0) throw NumericError("normalized: zero-length vector");
  return v / n;
}

/// Component of `w` orthogonal to the direction of `s`: w - (w . s_hat) s_hat.
inline Vector vector_rejection(const Eigen::Ref<const Vector>& w,
                               const Eigen::Ref<const Vector>& s) {
  if (w.size() != s.size()) throw DataError("vector_rejection: length mismatch");
  const Vector unit = normalized(s);
  return w - w.dot(unit) * unit;
}

/// Removes the component along a unit direction in place.
inline void remove_direction(Eigen::Ref<Vector> v, const Eigen::Ref<const Vector>& unit) {
  v -= v.dot(unit) * unit;
}

}  // namespace lexidebias
