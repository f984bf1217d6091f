#pragma once

// The two planar worked examples, built directly from coefficient strings.

#include "stochsym/model.hpp"

namespace stochsym::testing {

inline ExprVector vec2(std::initializer_list<const char*> items) {
  ExprVector v;
  for (const char* s : items) v.push_back(parse(s, 2));
  return v;
}

inline ExprMatrix mat2(std::initializer_list<std::initializer_list<const char*>> rows) {
  ExprMatrix M(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (const char* s : row) M(i, j++) = parse(s, 2);
    ++i;
  }
  return M;
}

inline Domain punctured_box() { return Domain({{-8, 8}, {-8, 8}}, {parse("x^2+y^2", 2)}, 0.005); }
inline Domain brownian_box() { return Domain::cube(2, 3.0); }

/// dX = X/|X|^2 dt + dW on the punctured plane.
inline Sde radial_sde() {
  return Sde(vec2({"x/(x^2+y^2)", "y/(x^2+y^2)"}), ExprMatrix::identity(2), punctured_box());
}

/// dX = X dt + [[x, y], [-y, x]] dW'.
inline Sde linear_sde() { return Sde(vec2({"x", "y"}), mat2({{"x", "y"}, {"-y", "x"}}), punctured_box()); }

inline Sde brownian_sde() { return Sde(vec2({"0", "0"}), ExprMatrix::identity(2), brownian_box()); }

inline ExprMatrix rotation_generator() { return mat2({{"0", "1"}, {"-1", "0"}}); }

inline InfinitesimalTransformation radial_dilation() {
  return {vec2({"x", "y"}), ExprMatrix(2, 2), Expression::constant(2)};
}
inline InfinitesimalTransformation radial_rotation() { return {vec2({"y", "-x"}), rotation_generator(), Expression()}; }

inline InfinitesimalTransformation bm_translation_x() { return InfinitesimalTransformation::strong(vec2({"1", "0"}), 2); }
inline InfinitesimalTransformation bm_translation_y() { return InfinitesimalTransformation::strong(vec2({"0", "1"}), 2); }
inline InfinitesimalTransformation bm_dilation() { return radial_dilation(); }
inline InfinitesimalTransformation bm_rotation() { return radial_rotation(); }
inline InfinitesimalTransformation bm_rotation_without_c() {
  return InfinitesimalTransformation::strong(vec2({"y", "-x"}), 2);
}

/// Rotation solving Y(B) = -B C along the angular field.
inline ExprMatrix reducing_rotation() {
  return mat2({{"x/sqrt(x^2+y^2)", "y/sqrt(x^2+y^2)"}, {"-y/sqrt(x^2+y^2)", "x/sqrt(x^2+y^2)"}});
}

/// The same rotation with the opposite sense.
inline ExprMatrix opposite_rotation() {
  return mat2({{"x/sqrt(x^2+y^2)", "-y/sqrt(x^2+y^2)"}, {"y/sqrt(x^2+y^2)", "x/sqrt(x^2+y^2)"}});
}

inline Expression inverse_square_radius() { return parse("1/(x^2+y^2)", 2); }

inline FiniteTransformation reducing_triad(const ExprMatrix& B) {
  return FiniteTransformation(vec2({"x", "y"}), vec2({"x", "y"}), B, inverse_square_radius(), punctured_box());
}

}  // namespace stochsym::testing
