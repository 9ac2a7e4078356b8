#include "wpcn/conic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

namespace wpcn {

// ---------------------------------------------------------------------------
// Problem container

int ConicProblem::rows() const {
  int r = 0;
  for (const auto& c : cones) r += c.dim;
  return r;
}

const VarSlice* ConicProblem::find(const std::string& name) const {
  for (const auto& v : var_map)
    if (v.name == name) return &v;
  return nullptr;
}

int ConicProblem::add_var(const std::string& name, int len, double scale) {
  VarSlice s{name, num_vars, len, scale};
  var_map.push_back(s);
  num_vars += len;
  objective.conservativeResize(num_vars);
  objective.tail(len).setZero();
  return s.start;
}

ConeBlock& ConicProblem::add_cone(ConeType type, int dim, const std::string& label) {
  ConeBlock c;
  c.type = type;
  c.dim = dim;
  c.label = label;
  c.b = RVec::Zero(dim);
  if (type == ConeType::Psd) {
    int side = 0;
    while (svec_dim(side) < dim) ++side;
    require(svec_dim(side) == dim, "PSD cone dimension is not triangular");
    c.side = side;
  }
  cones.push_back(std::move(c));
  return cones.back();
}

void ConicProblem::validate() const {
  require(num_vars >= 0, "negative variable count");
  require(objective.size() == num_vars, "objective length must equal num_vars");
  for (const auto& c : cones) {
    require(c.dim >= 1, "cone with no rows");
    require(c.b.size() == c.dim, "cone offset length mismatch");
    if (c.type == ConeType::SecondOrder) require(c.dim >= 1, "SOC needs >= 1 row");
    if (c.type == ConeType::RotatedSecondOrder) require(c.dim >= 2, "rotated SOC needs >= 2 rows");
    if (c.type == ConeType::Psd) require(svec_dim(c.side) == c.dim, "PSD side/dim mismatch");
    for (const auto& t : c.A) {
      require(t.row() >= 0 && t.row() < c.dim, "cone row index out of range");
      require(t.col() >= 0 && t.col() < num_vars, "cone column index out of range");
      require(std::isfinite(t.value()), "non-finite constraint coefficient");
    }
  }
  // var_map: disjoint slices inside [0, num_vars).
  std::vector<char> used(static_cast<std::size_t>(num_vars), 0);
  for (const auto& v : var_map) {
    require(v.start >= 0 && v.len >= 0 && v.start + v.len <= num_vars, "var_map slice out of range");
    for (int i = v.start; i < v.start + v.len; ++i) {
      require(!used[i], "var_map slices overlap");
      used[i] = 1;
    }
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalLimit: return "numerical_limit";
  }
  return "?";
}

int svec_dim(int side) { return side * (side + 1) / 2; }

int svec_index(int side, int i, int j) {
  // column-major lower triangle: column j holds rows j..side-1
  return j * side - j * (j - 1) / 2 + (i - j);
}

RVec svec(const RMat& S) {
  const int n = static_cast<int>(S.rows());
  RVec v(svec_dim(n));
  const double r2 = std::sqrt(2.0);
  int p = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) v(p++) = i == j ? S(i, j) : r2 * 0.5 * (S(i, j) + S(j, i));
  return v;
}

RMat smat(const RVec& v, int side) {
  RMat S(side, side);
  const double ir2 = 1.0 / std::sqrt(2.0);
  int p = 0;
  for (int j = 0; j < side; ++j)
    for (int i = j; i < side; ++i) {
      const double x = i == j ? v(p) : v(p) * ir2;
      S(i, j) = x;
      S(j, i) = x;
      ++p;
    }
  return S;
}

void dump_problem(std::ostream& os, const ConicProblem& p) {
  os << std::setprecision(17);
  os << "vars " << p.num_vars << '\n';
  for (int i = 0; i < p.objective.size(); ++i)
    if (p.objective(i) != 0.0) os << "obj " << i << ' ' << p.objective(i) << '\n';
  for (std::size_t c = 0; c < p.cones.size(); ++c) {
    const auto& cb = p.cones[c];
    const char* t = cb.type == ConeType::Nonneg               ? "nonneg"
                    : cb.type == ConeType::SecondOrder        ? "soc"
                    : cb.type == ConeType::RotatedSecondOrder ? "rsoc"
                                                              : "psd";
    os << "cone " << c << ' ' << t << ' ' << cb.dim;
    if (cb.type == ConeType::Psd) os << ' ' << cb.side;
    os << '\n';
    for (const auto& tr : cb.A) os << "a " << c << ' ' << tr.row() << ' ' << tr.col() << ' ' << tr.value() << '\n';
    for (int r = 0; r < cb.dim; ++r)
      if (cb.b(r) != 0.0) os << "b " << c << ' ' << r << ' ' << cb.b(r) << '\n';
  }
  for (const auto& v : p.var_map) os << "var " << v.name << ' ' << v.start << ' ' << v.len << ' ' << v.scale << '\n';
}

// ---------------------------------------------------------------------------
// Interior point method

namespace {

enum class Kind { Nonneg, Soc, Psd };

struct Cone {
  Kind kind = Kind::Nonneg;
  int off = 0;
  int dim = 0;
  int side = 0;
  std::vector<int> cols;  // global columns touched (SOC/PSD)
  RMat Gl;                // local dense block (SOC/PSD)
  RMat GJG;               // SOC: Gl^T J Gl

  // scaling state
  RVec w;         // nonneg: sqrt(s/z)
  double eta = 1;  // SOC
  RVec v;         // SOC: W = eta (2 v v^T - J)
  RVec wb;        // SOC: W^2 = eta^2 (2 wb wb^T - J)
  RMat R, Rinv;   // PSD
  RVec lam;       // scaled point (nonneg/SOC: dim entries, PSD: side eigenvalues)

  int degree() const { return kind == Kind::Nonneg ? dim : kind == Kind::Soc ? 1 : side; }
};

using Seg = Eigen::VectorBlock<RVec>;
using CSeg = Eigen::VectorBlock<const RVec>;

double soc_det(const Eigen::Ref<const RVec>& u) { return u(0) * u(0) - u.tail(u.size() - 1).squaredNorm(); }

RVec jmul(const Eigen::Ref<const RVec>& u) {
  RVec r = -u;
  r(0) = u(0);
  return r;
}

class Ipm {
 public:
  Ipm(const ConicProblem& p, const SolverSettings& st) : st_(st) { setup(p); }
  ConicSolution run();

 private:
  void setup(const ConicProblem& p);
  void equilibrate();
  void build_local_blocks();

  // cone operations on full-length vectors
  void compute_scaling(const RVec& s, const RVec& z);
  RVec apply_W(const RVec& x) const;
  RVec apply_WT(const RVec& x) const;
  RVec apply_W2(const RVec& x) const;
  RVec apply_W2inv(const RVec& x) const;
  RVec lambda_vec() const;  // lambda in cone coordinates
  RVec jordan(const RVec& u, const RVec& v) const;
  RVec jordan_div_lambda(const RVec& d) const;  // lambda \ d
  RVec identity() const;
  double max_step(const RVec& ds) const;  // max alpha with lambda + alpha ds in K
  double max_step_at(const RVec& x, const RVec& d) const;  // unscaled point
  double cone_margin(const RVec& x) const;  // inf{t: x + t e in K}

  bool factor();
  void kkt_solve(const RVec& a, const RVec& b, RVec& u, RVec& v) const;

  SolverSettings st_;
  int n_ = 0, m_ = 0;
  Eigen::SparseMatrix<double> G_, Gt_;
  Eigen::SparseMatrix<double> Gnn_;  // nonneg rows only (for the normal matrix)
  std::vector<int> nn_rows_;
  RVec c_, h_;
  std::vector<Cone> cones_;
  int nu_ = 0;

  // equilibration
  RVec dcol_, erow_;
  double cs_ = 1.0, hs_ = 1.0;
  RVec c_orig_, h_orig_;
  Eigen::SparseMatrix<double> G_orig_;

  RMat N_;
  Eigen::LLT<RMat> llt_;
};

void Ipm::setup(const ConicProblem& p) {
  p.validate();
  n_ = p.num_vars;
  m_ = p.rows();
  c_ = -p.objective;
  h_ = RVec::Zero(m_);
  std::vector<Eigen::Triplet<double>> trip;
  int off = 0;
  const double ir2 = 1.0 / std::sqrt(2.0);
  for (const auto& cb : p.cones) {
    Cone c;
    c.off = off;
    c.dim = cb.dim;
    switch (cb.type) {
      case ConeType::Nonneg: c.kind = Kind::Nonneg; break;
      case ConeType::SecondOrder:
      case ConeType::RotatedSecondOrder: c.kind = Kind::Soc; break;
      case ConeType::Psd:
        c.kind = Kind::Psd;
        c.side = cb.side;
        break;
    }
    // s = A x + b  ->  G = -A, h = b
    if (cb.type == ConeType::RotatedSecondOrder) {
      for (const auto& t : cb.A) {
        const int r = t.row();
        if (r == 0) {
          trip.emplace_back(off + 0, t.col(), -t.value() * ir2);
          trip.emplace_back(off + 1, t.col(), -t.value() * ir2);
        } else if (r == 1) {
          trip.emplace_back(off + 0, t.col(), -t.value() * ir2);
          trip.emplace_back(off + 1, t.col(), t.value() * ir2);
        } else {
          trip.emplace_back(off + r, t.col(), -t.value());
        }
      }
      h_(off + 0) = (cb.b(0) + cb.b(1)) * ir2;
      h_(off + 1) = (cb.b(0) - cb.b(1)) * ir2;
      for (int r = 2; r < cb.dim; ++r) h_(off + r) = cb.b(r);
    } else {
      for (const auto& t : cb.A) trip.emplace_back(off + t.row(), t.col(), -t.value());
      h_.segment(off, cb.dim) = cb.b;
    }
    nu_ += c.degree();
    cones_.push_back(std::move(c));
    off += cb.dim;
  }
  G_.resize(m_, n_);
  G_.setFromTriplets(trip.begin(), trip.end());
  G_.makeCompressed();
  c_orig_ = c_;
  h_orig_ = h_;
  G_orig_ = G_;
  dcol_ = RVec::Ones(n_);
  erow_ = RVec::Ones(static_cast<int>(cones_.size()));
  if (st_.equilibrate) equilibrate();
  Gt_ = G_.transpose();
  build_local_blocks();
}

void Ipm::equilibrate() {
  const int nc = static_cast<int>(cones_.size());
  std::vector<int> cone_of_row(m_);
  for (int i = 0; i < nc; ++i)
    for (int r = 0; r < cones_[i].dim; ++r) cone_of_row[cones_[i].off + r] = i;
  for (int it = 0; it < 12; ++it) {
    RVec colmax = RVec::Zero(n_);
    RVec conemax = RVec::Zero(nc);
    for (int j = 0; j < G_.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator itr(G_, j); itr; ++itr) {
        const double a = std::abs(itr.value());
        colmax(j) = std::max(colmax(j), a);
        const int ci = cone_of_row[itr.row()];
        conemax(ci) = std::max(conemax(ci), a);
      }
    RVec dc(n_), er(nc);
    for (int j = 0; j < n_; ++j) dc(j) = colmax(j) > 0 ? 1.0 / std::sqrt(colmax(j)) : 1.0;
    for (int i = 0; i < nc; ++i) er(i) = conemax(i) > 0 ? 1.0 / std::sqrt(conemax(i)) : 1.0;
    for (int j = 0; j < G_.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator itr(G_, j); itr; ++itr)
        itr.valueRef() *= dc(j) * er(cone_of_row[itr.row()]);
    dcol_.array() *= dc.array();
    erow_.array() *= er.array();
  }
  c_ = dcol_.cwiseProduct(c_orig_);
  for (int i = 0; i < nc; ++i) h_.segment(cones_[i].off, cones_[i].dim) = erow_(i) * h_orig_.segment(cones_[i].off, cones_[i].dim);
  cs_ = std::max(1.0, c_.lpNorm<Eigen::Infinity>());
  hs_ = std::max(1.0, h_.lpNorm<Eigen::Infinity>());
  c_ /= cs_;
  h_ /= hs_;
}

void Ipm::build_local_blocks() {
  // Row-major copy for row extraction.
  Eigen::SparseMatrix<double, Eigen::RowMajor> Gr = G_;
  std::vector<Eigen::Triplet<double>> nn;
  for (auto& c : cones_) {
    if (c.kind == Kind::Nonneg) {
      for (int r = 0; r < c.dim; ++r) {
        const int row = c.off + r;
        const int local = static_cast<int>(nn_rows_.size());
        nn_rows_.push_back(row);
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Gr, row); it; ++it)
          nn.emplace_back(local, it.col(), it.value());
      }
      continue;
    }
    std::map<int, int> colpos;
    for (int r = 0; r < c.dim; ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Gr, c.off + r); it; ++it)
        colpos.emplace(static_cast<int>(it.col()), 0);
    int q = 0;
    for (auto& kv : colpos) {
      kv.second = q++;
      c.cols.push_back(kv.first);
    }
    c.Gl = RMat::Zero(c.dim, q);
    for (int r = 0; r < c.dim; ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Gr, c.off + r); it; ++it)
        c.Gl(r, colpos[static_cast<int>(it.col())]) = it.value();
    if (c.kind == Kind::Soc) {
      RMat JG = -c.Gl;
      JG.row(0) = c.Gl.row(0);
      c.GJG = c.Gl.transpose() * JG;
    }
  }
  Gnn_.resize(static_cast<int>(nn_rows_.size()), n_);
  Gnn_.setFromTriplets(nn.begin(), nn.end());
}

void Ipm::compute_scaling(const RVec& s, const RVec& z) {
  for (auto& c : cones_) {
    const CSeg sc = s.segment(c.off, c.dim);
    const CSeg zc = z.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg:
        c.w = (sc.array() / zc.array()).sqrt();
        c.lam = (sc.array() * zc.array()).sqrt();
        break;
      case Kind::Soc: {
        const double sd = std::sqrt(std::max(soc_det(sc), 1e-300));
        const double zd = std::sqrt(std::max(soc_det(zc), 1e-300));
        const RVec sb = sc / sd;
        const RVec zb = zc / zd;
        const double gam = std::sqrt(std::max(0.5 * (1.0 + sb.dot(zb)), 1e-300));
        c.wb = (sb + jmul(zb)) / (2.0 * gam);
        c.eta = std::sqrt(sd / zd);
        c.v = c.wb;
        c.v(0) += 1.0;
        c.v /= std::sqrt(2.0 * (c.wb(0) + 1.0));
        // lambda = W z
        c.lam = c.eta * (2.0 * c.v * c.v.dot(zc) - jmul(zc));
        break;
      }
      case Kind::Psd: {
        const RMat S = smat(sc, c.side);
        const RMat Z = smat(zc, c.side);
        Eigen::LLT<RMat> ls(S), lz(Z);
        const RMat Ls = ls.matrixL();
        const RMat Lz = lz.matrixL();
        Eigen::JacobiSVD<RMat> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const RVec sig = svd.singularValues().cwiseMax(1e-300);
        c.R = Ls * svd.matrixV() * sig.cwiseSqrt().cwiseInverse().asDiagonal();
        c.Rinv = c.R.inverse();
        c.lam = sig;
        break;
      }
    }
  }
}

RVec Ipm::apply_W(const RVec& x) const {
  RVec y(x.size());
  for (const auto& c : cones_) {
    const CSeg xc = x.segment(c.off, c.dim);
    Seg yc = y.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg: yc = c.w.cwiseProduct(xc); break;
      case Kind::Soc: yc = c.eta * (2.0 * c.v * c.v.dot(xc) - jmul(xc)); break;
      case Kind::Psd: yc = svec(c.R.transpose() * smat(xc, c.side) * c.R); break;
    }
  }
  return y;
}

RVec Ipm::apply_WT(const RVec& x) const {
  RVec y(x.size());
  for (const auto& c : cones_) {
    const CSeg xc = x.segment(c.off, c.dim);
    Seg yc = y.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg: yc = c.w.cwiseProduct(xc); break;
      case Kind::Soc: yc = c.eta * (2.0 * c.v * c.v.dot(xc) - jmul(xc)); break;
      case Kind::Psd: yc = svec(c.R * smat(xc, c.side) * c.R.transpose()); break;
    }
  }
  return y;
}

RVec Ipm::apply_W2(const RVec& x) const {
  RVec y(x.size());
  for (const auto& c : cones_) {
    const CSeg xc = x.segment(c.off, c.dim);
    Seg yc = y.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg: yc = c.w.array().square() * xc.array(); break;
      case Kind::Soc: yc = c.eta * c.eta * (2.0 * c.wb * c.wb.dot(xc) - jmul(xc)); break;
      case Kind::Psd: {
        const RMat RRt = c.R * c.R.transpose();
        yc = svec(RRt * smat(xc, c.side) * RRt);
        break;
      }
    }
  }
  return y;
}

RVec Ipm::apply_W2inv(const RVec& x) const {
  RVec y(x.size());
  for (const auto& c : cones_) {
    const CSeg xc = x.segment(c.off, c.dim);
    Seg yc = y.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg: yc = xc.array() / c.w.array().square(); break;
      case Kind::Soc: {
        const RVec Jw = jmul(c.wb);
        yc = (2.0 * Jw * Jw.dot(xc) - jmul(xc)) / (c.eta * c.eta);
        break;
      }
      case Kind::Psd: {
        const RMat P = c.Rinv.transpose() * c.Rinv;
        yc = svec(P * smat(xc, c.side) * P);
        break;
      }
    }
  }
  return y;
}

RVec Ipm::lambda_vec() const {
  RVec l(m_);
  for (const auto& c : cones_) {
    if (c.kind == Kind::Psd) {
      l.segment(c.off, c.dim) = svec(RMat(c.lam.asDiagonal()));
    } else {
      l.segment(c.off, c.dim) = c.lam;
    }
  }
  return l;
}

RVec Ipm::jordan(const RVec& u, const RVec& v) const {
  RVec r(m_);
  for (const auto& c : cones_) {
    const CSeg uc = u.segment(c.off, c.dim);
    const CSeg vc = v.segment(c.off, c.dim);
    Seg rc = r.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg: rc = uc.cwiseProduct(vc); break;
      case Kind::Soc:
        rc(0) = uc.dot(vc);
        rc.tail(c.dim - 1) = uc(0) * vc.tail(c.dim - 1) + vc(0) * uc.tail(c.dim - 1);
        break;
      case Kind::Psd: {
        const RMat U = smat(uc, c.side);
        const RMat V = smat(vc, c.side);
        rc = svec(0.5 * (U * V + V * U));
        break;
      }
    }
  }
  return r;
}

RVec Ipm::jordan_div_lambda(const RVec& d) const {
  RVec r(m_);
  for (const auto& c : cones_) {
    const CSeg dc = d.segment(c.off, c.dim);
    Seg rc = r.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg: rc = dc.array() / c.lam.array(); break;
      case Kind::Soc: {
        const double l0 = c.lam(0);
        const auto l1 = c.lam.tail(c.dim - 1);
        const double x0 = (l0 * dc(0) - l1.dot(dc.tail(c.dim - 1))) / soc_det(c.lam);
        rc(0) = x0;
        rc.tail(c.dim - 1) = (dc.tail(c.dim - 1) - x0 * l1) / l0;
        break;
      }
      case Kind::Psd: {
        RMat D = smat(dc, c.side);
        for (int j = 0; j < c.side; ++j)
          for (int i = 0; i < c.side; ++i) D(i, j) = 2.0 * D(i, j) / (c.lam(i) + c.lam(j));
        rc = svec(D);
        break;
      }
    }
  }
  return r;
}

RVec Ipm::identity() const {
  RVec e = RVec::Zero(m_);
  for (const auto& c : cones_) {
    switch (c.kind) {
      case Kind::Nonneg: e.segment(c.off, c.dim).setOnes(); break;
      case Kind::Soc: e(c.off) = 1.0; break;
      case Kind::Psd:
        for (int i = 0; i < c.side; ++i) e(c.off + svec_index(c.side, i, i)) = 1.0;
        break;
    }
  }
  return e;
}

double soc_step(const Eigen::Ref<const RVec>& l, const Eigen::Ref<const RVec>& d) {
  const double inf = std::numeric_limits<double>::infinity();
  const int k = static_cast<int>(l.size());
  const double A = d(0) * d(0) - d.tail(k - 1).squaredNorm();
  const double B = l(0) * d(0) - l.tail(k - 1).dot(d.tail(k - 1));
  const double C = std::max(soc_det(l), 0.0);
  double a = inf;
  const double scale = std::max({std::abs(A), std::abs(B), C, 1e-300});
  if (std::abs(A) <= 1e-15 * scale) {
    if (B < 0) a = -C / (2.0 * B);
  } else {
    const double disc = B * B - A * C;
    if (A < 0) {
      a = (-B - std::sqrt(std::max(disc, 0.0))) / A;
    } else if (disc >= 0 && B < 0) {
      a = C / (-B + std::sqrt(disc));
    }
  }
  if (d(0) < 0) a = std::min(a, -l(0) / d(0));
  return std::max(a, 0.0);
}

double Ipm::max_step(const RVec& ds) const {
  double a = std::numeric_limits<double>::infinity();
  for (const auto& c : cones_) {
    const CSeg dc = ds.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg:
        for (int i = 0; i < c.dim; ++i)
          if (dc(i) < 0) a = std::min(a, -c.lam(i) / dc(i));
        break;
      case Kind::Soc: a = std::min(a, soc_step(c.lam, dc)); break;
      case Kind::Psd: {
        RMat D = smat(dc, c.side);
        const RVec il = c.lam.cwiseSqrt().cwiseInverse();
        D = il.asDiagonal() * D * il.asDiagonal();
        Eigen::SelfAdjointEigenSolver<RMat> es(D, Eigen::EigenvaluesOnly);
        const double mn = es.eigenvalues().minCoeff();
        if (mn < 0) a = std::min(a, -1.0 / mn);
        break;
      }
    }
  }
  return a;
}

double Ipm::cone_margin(const RVec& x) const {
  double t = -std::numeric_limits<double>::infinity();
  for (const auto& c : cones_) {
    const CSeg xc = x.segment(c.off, c.dim);
    switch (c.kind) {
      case Kind::Nonneg: t = std::max(t, -xc.minCoeff()); break;
      case Kind::Soc: t = std::max(t, xc.tail(c.dim - 1).norm() - xc(0)); break;
      case Kind::Psd: {
        Eigen::SelfAdjointEigenSolver<RMat> es(smat(xc, c.side), Eigen::EigenvaluesOnly);
        t = std::max(t, -es.eigenvalues().minCoeff());
        break;
      }
    }
  }
  return t;
}

bool Ipm::factor() {
  N_ = RMat::Zero(n_, n_);
  if (Gnn_.rows() > 0) {
    RVec d(Gnn_.rows());
    int p = 0;
    for (const auto& c : cones_)
      if (c.kind == Kind::Nonneg)
        for (int r = 0; r < c.dim; ++r) d(p++) = 1.0 / (c.w(r) * c.w(r));
    Eigen::SparseMatrix<double> DG = d.asDiagonal() * Gnn_;
    Eigen::SparseMatrix<double> NN = Eigen::SparseMatrix<double>(Gnn_.transpose()) * DG;
    N_ += RMat(NN);
  }
  for (const auto& c : cones_) {
    if (c.kind == Kind::Nonneg) continue;
    RMat L;
    if (c.kind == Kind::Soc) {
      const RVec Jw = jmul(c.wb);
      const RVec a = c.Gl.transpose() * Jw;
      L = (2.0 * a * a.transpose() - c.GJG) / (c.eta * c.eta);
    } else {
      const RMat P = c.Rinv.transpose() * c.Rinv;
      RMat Y(c.dim, c.Gl.cols());
      for (int q = 0; q < c.Gl.cols(); ++q) Y.col(q) = svec(P * smat(c.Gl.col(q), c.side) * P);
      L = c.Gl.transpose() * Y;
    }
    const int q = static_cast<int>(c.cols.size());
    for (int b = 0; b < q; ++b)
      for (int a = 0; a < q; ++a) N_(c.cols[a], c.cols[b]) += L(a, b);
  }
  N_ = 0.5 * (N_ + N_.transpose());
  const double reg = 1e-13 * std::max(1.0, N_.diagonal().maxCoeff());
  N_.diagonal().array() += reg;
  llt_.compute(N_);
  return llt_.info() == Eigen::Success;
}

// K [u; v] = [a; b] with K = [[0, G^T], [G, -W^T W]].
void Ipm::kkt_solve(const RVec& a, const RVec& b, RVec& u, RVec& v) const {
  auto once = [&](const RVec& ra, const RVec& rb, RVec& uu, RVec& vv) {
    uu = llt_.solve(ra + Gt_ * apply_W2inv(rb));
    vv = apply_W2inv(G_ * uu - rb);
  };
  once(a, b, u, v);
  // iterative refinement against the unregularized system
  const double scale = std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.size() ? b.cwiseAbs().maxCoeff() : 0.0));
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 6; ++it) {
    const RVec ra = a - Gt_ * v;
    const RVec rb = b - (G_ * u - apply_W2(v));
    const double res = std::max(ra.size() ? ra.cwiseAbs().maxCoeff() : 0.0, rb.size() ? rb.cwiseAbs().maxCoeff() : 0.0);
    if (res <= 1e-15 * scale || res >= 0.5 * prev) break;
    prev = res;
    RVec du, dv;
    once(ra, rb, du, dv);
    u += du;
    v += dv;
  }
}

ConicSolution Ipm::run() {
  ConicSolution sol;
  const double tol = st_.tol;
  sol.x = RVec::Zero(n_);
  sol.z = RVec::Zero(m_);

  const RVec e = identity();
  // Initial point from least-squares solves with W = I.
  for (auto& c : cones_) {
    switch (c.kind) {
      case Kind::Nonneg: c.w = RVec::Ones(c.dim); break;
      case Kind::Soc:
        c.eta = 1.0;
        c.wb = RVec::Zero(c.dim);
        c.wb(0) = 1.0;
        c.v = c.wb;
        break;
      case Kind::Psd:
        c.R = RMat::Identity(c.side, c.side);
        c.Rinv = c.R;
        break;
    }
  }
  if (!factor()) {
    sol.status = SolveStatus::NumericalLimit;
    return sol;
  }
  RVec x, s, z, tmp;
  kkt_solve(RVec::Zero(n_), h_, x, tmp);
  s = -tmp;
  kkt_solve(-c_, RVec::Zero(m_), tmp, z);
  {
    const double ts = cone_margin(s);
    if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e;
    const double tz = cone_margin(z);
    if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e;
  }
  double tau = 1.0, kappa = 1.0;

  const double cnorm = std::max(1.0, c_orig_.norm());
  const double hnorm = std::max(1.0, h_orig_.norm());

  double best_score = std::numeric_limits<double>::infinity();
  auto unscale = [&](const RVec& xs, const RVec& ss, const RVec& zs, RVec& xo, RVec& so, RVec& zo) {
    xo = dcol_.cwiseProduct(xs) * hs_;
    so.resize(m_);
    zo.resize(m_);
    for (std::size_t i = 0; i < cones_.size(); ++i) {
      const auto& c = cones_[i];
      so.segment(c.off, c.dim) = ss.segment(c.off, c.dim) * (hs_ / erow_(static_cast<int>(i)));
      zo.segment(c.off, c.dim) = zs.segment(c.off, c.dim) * (cs_ * erow_(static_cast<int>(i)));
    }
  };

  for (int iter = 0; iter <= st_.max_iter; ++iter) {
    // Convergence checks on the unscaled problem.
    RVec xo, so, zo;
    unscale(x / tau, s / tau, z / tau, xo, so, zo);
    const double pres = (G_orig_ * xo + so - h_orig_).norm() / hnorm;
    const double dres = (G_orig_.transpose() * zo + c_orig_).norm() / cnorm;
    const double pcost = c_orig_.dot(xo);
    const double dcost = -h_orig_.dot(zo);
    const double gap = so.dot(zo);
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0) relgap = gap / -pcost;
    else if (dcost > 0) relgap = gap / dcost;
    const double score = std::max({pres, dres, std::min(std::abs(gap), std::abs(relgap))});
    if (score < best_score) {
      best_score = score;
      sol.x = xo;
      sol.z = zo;
      sol.primal_residual = pres;
      sol.dual_residual = dres;
      sol.gap = gap;
      sol.iterations = iter;
    }
    if (pres <= tol && dres <= tol && (gap <= tol || relgap <= tol)) {
      sol.status = SolveStatus::Optimal;
      sol.x = xo;
      sol.z = zo;
      sol.primal_residual = pres;
      sol.dual_residual = dres;
      sol.gap = gap;
      sol.iterations = iter;
      sol.objective_value = -pcost;
      return sol;
    }
    {
      RVec xu, su, zu;
      unscale(x, s, z, xu, su, zu);
      const double hz = h_orig_.dot(zu);
      const double cx = c_orig_.dot(xu);
      if (hz < 0 && (G_orig_.transpose() * zu).norm() / cnorm <= tol * -hz) {
        sol.status = SolveStatus::Infeasible;
        sol.iterations = iter;
        sol.z = zu / -hz;
        return sol;
      }
      if (cx < 0 && (G_orig_ * xu + su).norm() / hnorm <= tol * -cx) {
        sol.status = SolveStatus::Unbounded;
        sol.iterations = iter;
        sol.x = xu / -cx;
        return sol;
      }
    }
    if (iter == st_.max_iter) break;

    const RVec rx = Gt_ * z + c_ * tau;
    const RVec rz = G_ * x + s - h_ * tau;
    const double rt = kappa + c_.dot(x) + h_.dot(z);
    const double mu = (s.dot(z) + tau * kappa) / (nu_ + 1);

    compute_scaling(s, z);
    if (!factor()) break;
    const RVec lam = lambda_vec();

    RVec x1, z1;
    kkt_solve(-c_, h_, x1, z1);
    const RVec Wz1 = apply_W(z1);
    const double denom = -Wz1.squaredNorm() - kappa / tau;

    struct Dir {
      RVec dx, dz, ds, dst, dzt;
      double dtau = 0, dkap = 0;
    };
    auto direction = [&](double eta, const RVec& dsv, double dk) {
      Dir d;
      const RVec dsp = jordan_div_lambda(dsv);
      RVec x2, z2;
      kkt_solve(-eta * rx, -eta * rz - apply_WT(dsp), x2, z2);
      d.dtau = (-eta * rt - dk / tau - c_.dot(x2) - h_.dot(z2)) / denom;
      d.dx = x2 + d.dtau * x1;
      d.dz = z2 + d.dtau * z1;
      d.dzt = apply_W(d.dz);
      d.dst = dsp - d.dzt;
      d.ds = apply_WT(d.dst);
      d.dkap = (dk - kappa * d.dtau) / tau;
      return d;
    };
    auto step = [&](const Dir& d) {
      double a = std::min(max_step(d.dst), max_step(d.dzt));
      if (d.dtau < 0) a = std::min(a, -tau / d.dtau);
      if (d.dkap < 0) a = std::min(a, -kappa / d.dkap);
      return a;
    };

    const RVec ll = jordan(lam, lam);
    const Dir aff = direction(1.0, -ll, -kappa * tau);
    const double aa = std::min(1.0, step(aff));
    const double sigma = std::pow(1.0 - aa, 3);
    const RVec dsc = -ll - jordan(aff.dst, aff.dzt) + sigma * mu * e;
    const double dkc = -kappa * tau - aff.dtau * aff.dkap + sigma * mu;
    const Dir cmb = direction(1.0 - sigma, dsc, dkc);
    const double a = std::min(1.0, 0.99 * step(cmb));
    if (!(a > 1e-12)) break;

    x += a * cmb.dx;
    z += a * cmb.dz;
    s += a * cmb.ds;
    tau += a * cmb.dtau;
    kappa += a * cmb.dkap;
    // Guard against drift out of the cone from round-off.
    if (cone_margin(s) >= 0 || cone_margin(z) >= 0 || !(tau > 0) || !(kappa > 0)) break;
  }
  sol.status = SolveStatus::NumericalLimit;
  sol.objective_value = -c_orig_.dot(sol.x);
  return sol;
}

}  // namespace

ConicSolution solve(const ConicProblem& p, const SolverSettings& s) {
  Ipm ipm(p, s);
  return ipm.run();
}

ConicSolution solve(const ConicProblem& p, double tol) {
  SolverSettings s;
  s.tol = tol;
  return solve(p, s);
}

}  // namespace wpcn
