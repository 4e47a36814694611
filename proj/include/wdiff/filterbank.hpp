#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wdiff {

enum class WaveletFamily { db, sym, coif, bior, rbio };

// Analysis filters h (low-pass) and g (high-pass) are correlated with the
// signal, y_m = sum_k f_k x_{2m+2-F+k}; synthesis filters h_syn/g_syn rebuild
// the parent level. All filters are sqrt(2)-normalized: sum(h) = sqrt(2).
struct FilterBank {
  WaveletFamily family = WaveletFamily::db;
  int order = 1;       // p, or p_r for bior/rbio
  int order_dual = 0;  // p_d for bior/rbio, 0 otherwise
  Eigen::VectorXd h;
  Eigen::VectorXd g;
  Eigen::VectorXd h_syn;
  Eigen::VectorXd g_syn;
  bool orthogonal = true;

  Eigen::Index length() const { return h.size(); }
  std::string name() const;
  // Vanishing moments of the analysis high-pass filter.
  int vanishing_moments() const;
};

FilterBank make_filter_bank(WaveletFamily family, int order, int order_dual = 0);
// Accepts "db1".."db8", "sym2".."sym8", "coif1".."coif3", "bior2.2", "rbio2.2".
FilterBank make_filter_bank(std::string_view name);

std::vector<std::string> supported_wavelets();

// g_k = (-1)^k h_{F-1-k}
Eigen::VectorXd qmf_highpass(const Eigen::VectorXd& h);

std::pair<Eigen::VectorXd, Eigen::VectorXd> synthesis_filters(const FilterBank& fb);

// Closed-form Daubechies-2 scaling filter.
Eigen::VectorXd db2_closed_form();

struct IdentityCheck {
  std::string name;
  std::optional<double> violation;  // nullopt: not applicable to this family
  double tolerance = 0.0;

  bool passed() const { return !violation || *violation <= tolerance; }
};

using FilterReport = std::vector<IdentityCheck>;

// Entries: sum_rule, shift_orthonormality, qmf, vanishing_moments,
// perfect_reconstruction.
FilterReport verify_filter_identities(const FilterBank& fb);
bool all_passed(const FilterReport& report);
const IdentityCheck& find_check(const FilterReport& report, std::string_view name);

}  // namespace wdiff
