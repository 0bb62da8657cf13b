#ifndef FCG_SPECTRAL_HPP
#define FCG_SPECTRAL_HPP

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fcg/orbits.hpp"

namespace fcg {

struct SpectralOptions {
  int q0 = 64;
  int qmax = 1024;
  double null_tol = 1e-6;         // absolute fast path, relative to the coefficient scale
  double zero_band = 3e-3;        // candidate band for the two-mesh ratio rule
  double classify_margin = 1e-4;  // |mu| - 1 margin for stability classes
  double integrator_tol = 1e-11;
  int direct_cover_max = 6;       // m up to which ind(c^m) is also assembled directly
};

// Coefficient fields of the second variation of E along a loop on [0,1]:
//   d2E(X,X) = int  Xdot' P Xdot + 2 X' Q Xdot + X' R X  dt.
// Orbit-driven instances carry charts; synthetic ones are chart-free.
struct CoefficientField {
  int n = 1;
  double T = 1.0;  // loop length, for labeling only
  std::function<void(double t, Eigen::MatrixXd& P, Eigen::MatrixXd& Q, Eigen::MatrixXd& R)> eval;
};

// Discretized twisted second variation: piecewise-linear elements on q nodes,
// boundary condition X(1) = conj(z) X(0).
struct IndexForm {
  int q = 0;
  int n = 0;
  std::complex<double> z;
  Eigen::MatrixXcd A;  // Hermitian, dimension n q
  Eigen::MatrixXcd B;  // mass matrix, Hermitian positive definite
};

struct BottValue {
  int index = 0;    // I_c(z)
  int nullity = 0;  // N_c(z); the S1 direction is removed at z = 1
  int q_resolved = 0;
};

struct SplittingNumbers {
  std::complex<double> z;
  int s_plus = 0;
  int s_minus = 0;
  int nullity = 0;
};

struct IndexData {
  double L = 0;
  int M = 0;
  std::vector<int> ind;    // ind(c^m), 1-based in m
  std::vector<int> null_;  // null(c^m)
  std::vector<int> direct_ind;   // directly assembled covers, m <= direct_cover_max
  std::vector<int> direct_null;
  double alpha = 0;             // average index (arc-exact circle integral)
  double alpha_circle_mean = 0; // plain mean over the 64th roots of unity
  double mean_alpha = 0;        // alpha / L
  std::vector<std::pair<double, BottValue>> samples;  // (angle, value) at the 64th roots
  std::vector<SplittingNumbers> splittings;
  bool bott_consistent = false;
};

struct PoincareData {
  Eigen::MatrixXd P;  // 2(n-1) x 2(n-1), symplectic basis
  std::vector<std::complex<double>> eigenvalues;
  double symplectic_defect = 0;
};

enum class StabilityKind { Hyperbolic, Elliptic, EllipticParabolic, Degenerate, Mixed };

inline const char* stability_name(StabilityKind k) {
  switch (k) {
    case StabilityKind::Hyperbolic: return "hyperbolic";
    case StabilityKind::Elliptic: return "elliptic";
    case StabilityKind::EllipticParabolic: return "elliptic-parabolic";
    case StabilityKind::Degenerate: return "degenerate";
    case StabilityKind::Mixed: return "mixed";
  }
  return "?";
}

struct StabilityClass {
  StabilityKind kind = StabilityKind::Mixed;
  bool non_hyperbolic_by_index = false;  // ind(c) != alpha_c
  bool elliptic_parabolic_by_gap = false;  // ind(c^2) - 2 ind(c) = n - 1
  int index_gap = 0;
  std::string evidence;
};

// Drives the twisted FEM with the two-mesh resolution policy and caches
// everything per orbit.  Construct either from an orbit or from a synthetic
// coefficient field (the latter has no Poincare map or S1 direction).
class IndexComputer {
 public:
  IndexComputer(const Metric<2>& m, const ClosedGeodesic<2>& c, SpectralOptions opt = {});
  IndexComputer(CoefficientField field, SpectralOptions opt = {});

  BottValue bott(std::complex<double> z);
  int direct_cover_index(int m);              // FEM on c^m, tiled elements
  SplittingNumbers splitting(std::complex<double> z0);
  IndexData index_data(int M);
  const PoincareData* poincare();             // nullptr for synthetic fields
  IndexForm form(std::complex<double> z, int q, int tile = 1);  // raw assembly
  double length() const { return T_; }
  const SpectralOptions& options() const { return opt_; }

 private:
  struct Mesh;
  struct Impl;
  std::shared_ptr<Impl> impl_;
  SpectralOptions opt_;
  double T_ = 0;
};

// --- spec-facing free functions ---------------------------------------------

IndexForm second_variation(const Metric<2>& m, const ClosedGeodesic<2>& c, int q,
                           std::complex<double> z);

BottValue bott_function(const Metric<2>& m, const ClosedGeodesic<2>& c, std::complex<double> z,
                        const SpectralOptions& opt = {});

IndexData index_sequence(const Metric<2>& m, const ClosedGeodesic<2>& c, int M,
                         const SpectralOptions& opt = {});

// alpha from the tabulated samples plus the spec'd cross-checks; n is the
// sphere dimension entering |ind(c^m) - m alpha| <= n - 1.
double average_index(const IndexData& data, int n = 2);

PoincareData poincare_map(const Metric<2>& m, const ClosedGeodesic<2>& c,
                          double integrator_tol = 1e-12);

StabilityClass classify(const PoincareData& pd, const IndexData& id, int n,
                        double margin = 1e-4);

}  // namespace fcg

#endif
