#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spamm/dense.hpp"
#include "spamm/precond.hpp"
#include "spamm/spamm.hpp"
#include "spamm/sqrt_iter.hpp"

namespace spamm::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Matrix Market

/// Reads a square real (or integer) Matrix Market file in coordinate or
/// array format. Symmetric storage is expanded; pattern, complex and
/// skew-symmetric files are rejected.
DenseMatrix read_matrix_market(const fs::path &path);

/// Writes the lower triangle of a symmetric matrix (or every nonzero of a
/// general one) in coordinate format with 17 significant digits.
void write_matrix_market(const DenseMatrix &m, const fs::path &path,
                         bool symmetric = true);

bool is_symmetric(const DenseMatrix &m, double rel_tol = 0.0);

// ---------------------------------------------------------------------------
// Synthetic decay matrices

enum class Ordering { natural, morton };

std::string_view to_string(Ordering o) noexcept;
Ordering ordering_from_string(std::string_view s);

/// How target_condition is reached.
///  - spectral: eigenvalues are reshaped by a power law
///    lambda -> lambda_max (lambda / lambda_max)^p. Eigenvectors are kept, so
///    the small eigenvalues live in smooth, delocalized modes.
///  - graded: congruence by a diagonal g_i = exp(-p u_i / 2) with u_i drawn
///    uniformly from [0, 1) by `seed`. Decay is preserved and the small
///    eigenvalues stay localized on strongly damped sites, the way near
///    linear dependencies of diffuse basis functions are.
/// In both cases p is solved for so the condition number hits the target.
enum class Surgery { spectral, graded };

std::string_view to_string(Surgery s) noexcept;
Surgery surgery_from_string(std::string_view s);

struct SyntheticSpec {
  std::size_t n = 64;
  int lattice_dim = 1;
  double decay_rate = 1.0;
  double diagonal_shift = 0.0;
  Ordering ordering = Ordering::natural;
  std::optional<double> target_condition;
  Surgery surgery = Surgery::spectral;
  std::uint64_t seed = 0;
};

using LatticePoint = std::array<std::uint32_t, 3>;

/// Points of an n-point lattice in natural (row-major, x fastest) order.
std::vector<LatticePoint> lattice_points(std::size_t n, int lattice_dim);

/// m_ij = exp(-gamma |p_i - p_j|) + shift delta_ij over lattice points,
/// ordered naturally or along the Morton curve.
DenseMatrix gen_decay(const SyntheticSpec &spec);

/// Permutation sorting points by interleaved-bit Morton code (x in the
/// lowest bit, then y, then z), ties broken by original index. perm[r] is
/// the original index of the point ranked r. Coordinates must fit in 21
/// bits.
std::vector<std::size_t> morton_order(const std::vector<LatticePoint> &points,
                                      int dims);

std::uint64_t morton_code(const LatticePoint &p, int dims);

// ---------------------------------------------------------------------------
// Volume and history export

enum class VolumeFormat { csv, legacy_vtk_points };

VolumeFormat volume_format_from_string(std::string_view s);

void export_volumes(const VolumeLog &log, const fs::path &path,
                    VolumeFormat format = VolumeFormat::csv);

VolumeLog read_volumes_csv(const fs::path &path);

struct RunManifest {
  std::map<std::string, std::string> config;
  std::vector<HistoryRow> history;
  std::map<std::string, std::string> outputs;
};

/// CSV with header k,t_k,alpha,eps,vol_y,vol_z,vol_x.
void export_history(const RunManifest &manifest, const fs::path &path);

struct HistoryCsvRow {
  std::size_t k = 0;
  double t = 0.0;
  double alpha = 1.0;
  double eps = 0.0;
  double vol_y = 0.0;
  double vol_z = 0.0;
  double vol_x = 0.0;
};

std::vector<HistoryCsvRow> read_history(const fs::path &path);

/// JSON rendering of the manifest (config echo, history, outputs).
void write_manifest_json(const RunManifest &manifest, const fs::path &path);

// ---------------------------------------------------------------------------
// Product representation on disk: one Matrix Market file per slice plus a
// manifest.json carrying mu, tau0 and tau_apply per slice.

void save_representation(const precond::ProductRepresentation &rep,
                         const fs::path &dir);

precond::ProductRepresentation load_representation(const fs::path &dir,
                                                   std::size_t block_size);

} // namespace spamm::io
