// Axis-aligned boxes, overlap measures and the paired-offset parameterization
// shared by label assignment and decoding.
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace chainflow {

/// Axis-aligned rectangle in pixels, stored as (left, top, width, height).
///
/// Width and height are strictly positive and every field is finite; the
/// constructor rejects anything else instead of clamping.
template <typename Scalar>
class Box {
 public:
  Box(Scalar x, Scalar y, Scalar w, Scalar h) : x_(x), y_(y), w_(w), h_(h) {
    using std::isfinite;
    if (!(isfinite(x) && isfinite(y) && isfinite(w) && isfinite(h)) ||
        !(w > Scalar(0)) || !(h > Scalar(0))) {
      std::ostringstream msg;
      msg << "invalid box (" << x << ", " << y << ", " << w << ", " << h
          << "): size must be positive and finite";
      throw std::invalid_argument(msg.str());
    }
  }

  static Box FromCenter(Scalar cx, Scalar cy, Scalar w, Scalar h) {
    return Box(cx - w / Scalar(2), cy - h / Scalar(2), w, h);
  }

  Scalar x() const { return x_; }
  Scalar y() const { return y_; }
  Scalar w() const { return w_; }
  Scalar h() const { return h_; }
  Scalar right() const { return x_ + w_; }
  Scalar bottom() const { return y_ + h_; }
  Scalar cx() const { return x_ + w_ / Scalar(2); }
  Scalar cy() const { return y_ + h_ / Scalar(2); }
  Scalar area() const { return w_ * h_; }

  Eigen::Matrix<Scalar, 4, 1> ltwh() const { return {x_, y_, w_, h_}; }

  template <typename NewScalar>
  Box<NewScalar> cast() const {
    return Box<NewScalar>(NewScalar(x_), NewScalar(y_), NewScalar(w_),
                          NewScalar(h_));
  }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  Scalar x_;
  Scalar y_;
  Scalar w_;
  Scalar h_;
};

using Boxd = Box<double>;

/// Regression offsets (dx, dy, dw, dh) of a box relative to an anchor.
template <typename Scalar>
using OffsetQuad = Eigen::Matrix<Scalar, 4, 1>;

using OffsetQuadd = OffsetQuad<double>;

template <typename Scalar>
Scalar intersection_area(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar iw = std::min(a.right(), b.right()) - std::max(a.x(), b.x());
  const Scalar ih = std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y());
  if (iw <= Scalar(0) || ih <= Scalar(0)) return Scalar(0);
  return iw * ih;
}

/// Intersection over union.
template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  if (inter == Scalar(0)) return Scalar(0);
  const Scalar ratio = inter / (a.area() + b.area() - inter);
  return std::min(ratio, Scalar(1));
}

/// Intersection over the smaller of the two areas.
template <typename Scalar>
Scalar iom(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  if (inter == Scalar(0)) return Scalar(0);
  return std::min(inter / std::min(a.area(), b.area()), Scalar(1));
}

/// Intersection of two boxes, or nothing when they do not overlap.
template <typename Scalar>
std::optional<Box<Scalar>> clip_to(const Box<Scalar>& box,
                                   const Box<Scalar>& window) {
  const Scalar l = std::max(box.x(), window.x());
  const Scalar t = std::max(box.y(), window.y());
  const Scalar r = std::min(box.right(), window.right());
  const Scalar b = std::min(box.bottom(), window.bottom());
  if (r <= l || b <= t) return std::nullopt;
  return Box<Scalar>(l, t, r - l, b - t);
}

/// Center/size offsets of `target` relative to `anchor`:
/// dx = (cx_g - cx_a) / w_a, dy = (cy_g - cy_a) / h_a,
/// dw = ln(w_g / w_a), dh = ln(h_g / h_a).
template <typename Scalar>
OffsetQuad<Scalar> encode_offsets(const Box<Scalar>& anchor,
                                  const Box<Scalar>& target) {
  using std::log;
  OffsetQuad<Scalar> d;
  d << (target.cx() - anchor.cx()) / anchor.w(),
      (target.cy() - anchor.cy()) / anchor.h(), log(target.w() / anchor.w()),
      log(target.h() / anchor.h());
  if (!d.allFinite()) {
    throw std::invalid_argument("encode_offsets: non-finite offsets");
  }
  return d;
}

/// Inverse of encode_offsets.
template <typename Scalar, typename Derived>
Box<Scalar> decode_offsets(const Box<Scalar>& anchor,
                           const Eigen::MatrixBase<Derived>& d) {
  using std::exp;
  const Scalar cx = anchor.cx() + d(0) * anchor.w();
  const Scalar cy = anchor.cy() + d(1) * anchor.h();
  return Box<Scalar>::FromCenter(cx, cy, anchor.w() * exp(d(2)),
                                 anchor.h() * exp(d(3)));
}

}  // namespace chainflow
