#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace latwave {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A lattice sequence with explicit values on a finite window of sites and
/// constant tail values on either side.  Site access is total: sites left of
/// the window read tail_left, sites right of it read tail_right.
class LatticeState {
public:
  LatticeState(int window_lo, int window_hi, int n)
      : lo_(window_lo), n_(n), values_(static_cast<size_t>(window_hi - window_lo + 1) * n, 0.0),
        tail_left_(Vec::Zero(n)), tail_right_(Vec::Zero(n)) {
    if (window_hi < window_lo) throw std::invalid_argument("LatticeState: empty window");
    if (n <= 0) throw std::invalid_argument("LatticeState: component count must be positive");
  }

  static LatticeState constant(int lo, int hi, const Vec& value) {
    LatticeState s(lo, hi, static_cast<int>(value.size()));
    for (int j = lo; j <= hi; ++j)
      for (int k = 0; k < s.n_; ++k) s.values_[s.index(j) + k] = value[k];
    s.tail_left_ = value;
    s.tail_right_ = value;
    return s;
  }

  int window_lo() const { return lo_; }
  int window_hi() const { return lo_ + width() - 1; }
  int width() const { return static_cast<int>(values_.size()) / n_; }
  int comps() const { return n_; }
  bool in_window(int j) const { return j >= window_lo() && j <= window_hi(); }

  /// Total site read: window value, or the appropriate tail.
  Vec site(int j) const {
    if (j < lo_) return tail_left_;
    if (j > window_hi()) return tail_right_;
    return Eigen::Map<const Vec>(values_.data() + index(j), n_);
  }

  double site_comp(int j, int k) const {
    if (j < lo_) return tail_left_[k];
    if (j > window_hi()) return tail_right_[k];
    return values_[index(j) + k];
  }

  /// Mutable access to a window site (throws outside the window).
  double* at(int j) {
    if (!in_window(j)) throw std::out_of_range("LatticeState::at: site outside window");
    return values_.data() + index(j);
  }
  const double* at(int j) const {
    if (!in_window(j)) throw std::out_of_range("LatticeState::at: site outside window");
    return values_.data() + index(j);
  }

  void set_site(int j, const Vec& v) {
    double* p = at(j);
    for (int k = 0; k < n_; ++k) p[k] = v[k];
  }

  const Vec& tail_left() const { return tail_left_; }
  const Vec& tail_right() const { return tail_right_; }
  void set_tails(const Vec& left, const Vec& right) {
    if (left.size() != n_ || right.size() != n_)
      throw std::invalid_argument("LatticeState::set_tails: component mismatch");
    tail_left_ = left;
    tail_right_ = right;
  }

  std::vector<double>& raw() { return values_; }
  const std::vector<double>& raw() const { return values_; }

  /// Same sequence re-expressed on a wider (or equal) explicit window.
  LatticeState expanded(int lo, int hi) const {
    if (lo > window_lo() || hi < window_hi())
      throw std::invalid_argument("LatticeState::expanded: window must contain the current one");
    LatticeState out(lo, hi, n_);
    out.tail_left_ = tail_left_;
    out.tail_right_ = tail_right_;
    for (int j = lo; j <= hi; ++j) out.set_site(j, site(j));
    return out;
  }

  bool finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return tail_left_.allFinite() && tail_right_.allFinite();
  }

private:
  size_t index(int j) const { return static_cast<size_t>(j - lo_) * n_; }

  int lo_;
  int n_;
  std::vector<double> values_;
  Vec tail_left_, tail_right_;
};

/// (S^k X)_j = X_{j-k}: window indices translate by k, tails unchanged.
inline LatticeState shift(const LatticeState& x, int k) {
  LatticeState s(x.window_lo() + k, x.window_hi() + k, x.comps());
  s.raw() = x.raw();
  s.set_tails(x.tail_left(), x.tail_right());
  return s;
}

namespace detail {
inline void require_same_comps(const LatticeState& a, const LatticeState& b, const char* op) {
  if (a.comps() != b.comps())
    throw std::invalid_argument(std::string(op) + ": component count mismatch");
}
}  // namespace detail

/// Sitewise combination on the union window; tails combine componentwise.
template <class F>
LatticeState combine(const LatticeState& a, const LatticeState& b, F&& f, const char* op) {
  detail::require_same_comps(a, b, op);
  const int lo = std::min(a.window_lo(), b.window_lo());
  const int hi = std::max(a.window_hi(), b.window_hi());
  LatticeState out(lo, hi, a.comps());
  Vec tl(a.comps()), tr(a.comps());
  for (int k = 0; k < a.comps(); ++k) {
    tl[k] = f(a.tail_left()[k], b.tail_left()[k]);
    tr[k] = f(a.tail_right()[k], b.tail_right()[k]);
  }
  out.set_tails(tl, tr);
  for (int j = lo; j <= hi; ++j) {
    double* p = out.at(j);
    for (int k = 0; k < a.comps(); ++k) p[k] = f(a.site_comp(j, k), b.site_comp(j, k));
  }
  return out;
}

inline LatticeState operator+(const LatticeState& a, const LatticeState& b) {
  return combine(a, b, [](double x, double y) { return x + y; }, "operator+");
}

inline LatticeState operator-(const LatticeState& a, const LatticeState& b) {
  return combine(a, b, [](double x, double y) { return x - y; }, "operator-");
}

/// Sitewise (componentwise) product.
inline LatticeState sitewise_product(const LatticeState& a, const LatticeState& b) {
  return combine(a, b, [](double x, double y) { return x * y; }, "sitewise_product");
}

inline LatticeState scaled(const LatticeState& a, double s) {
  LatticeState out = a;
  for (double& v : out.raw()) v *= s;
  out.set_tails(a.tail_left() * s, a.tail_right() * s);
  return out;
}

/// sup over all of Z of the componentwise max-abs value.
inline double sup_norm(const LatticeState& a) {
  double m = std::max(a.tail_left().cwiseAbs().maxCoeff(), a.tail_right().cwiseAbs().maxCoeff());
  for (double v : a.raw()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(const LatticeState& a, const LatticeState& b) {
  return sup_norm(a - b);
}

}  // namespace latwave
