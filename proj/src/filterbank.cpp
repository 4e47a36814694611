#include "wdiff/filterbank.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "wdiff/error.hpp"

namespace wdiff {

namespace detail {
const std::map<std::string, std::vector<double>>& orthogonal_tables();
}

namespace {

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd reversed(const Eigen::VectorXd& v) { return v.reverse(); }

const char* family_prefix(WaveletFamily f) {
  switch (f) {
    case WaveletFamily::db: return "db";
    case WaveletFamily::sym: return "sym";
    case WaveletFamily::coif: return "coif";
    case WaveletFamily::bior: return "bior";
    case WaveletFamily::rbio: return "rbio";
  }
  return "?";
}

// CDF 2.2 (LeGall 5/3) in the zero-padded length-6 layout.
FilterBank cdf22(bool reverse_roles) {
  const double r = std::sqrt(2.0);
  Eigen::VectorXd dec_lo(6), dec_hi(6), rec_lo(6), rec_hi(6);
  dec_lo << 0.0, -r / 8, r / 4, 3 * r / 4, r / 4, -r / 8;
  dec_hi << 0.0, r / 4, -r / 2, r / 4, 0.0, 0.0;
  rec_lo << 0.0, r / 4, r / 2, r / 4, 0.0, 0.0;
  rec_hi << 0.0, r / 8, r / 4, -3 * r / 4, r / 4, r / 8;

  FilterBank fb;
  fb.family = reverse_roles ? WaveletFamily::rbio : WaveletFamily::bior;
  fb.order = 2;
  fb.order_dual = 2;
  fb.orthogonal = false;
  // The transform correlates with h, so the stored analysis filters are the
  // reversed convolution kernels.
  if (reverse_roles) {
    fb.h = rec_lo.reverse();
    fb.g = rec_hi.reverse();
    fb.h_syn = dec_lo.reverse();
    fb.g_syn = dec_hi.reverse();
  } else {
    fb.h = dec_lo.reverse();
    fb.g = dec_hi.reverse();
    fb.h_syn = rec_lo.reverse();
    fb.g_syn = rec_hi.reverse();
  }
  return fb;
}

}  // namespace

std::string FilterBank::name() const {
  std::string s = family_prefix(family) + std::to_string(order);
  if (family == WaveletFamily::bior || family == WaveletFamily::rbio) {
    s += "." + std::to_string(order_dual);
  }
  return s;
}

int FilterBank::vanishing_moments() const {
  switch (family) {
    case WaveletFamily::db:
    case WaveletFamily::sym: return order;
    case WaveletFamily::coif: return 2 * order;
    case WaveletFamily::bior:
    case WaveletFamily::rbio: return order;
  }
  return 0;
}

Eigen::VectorXd qmf_highpass(const Eigen::VectorXd& h) {
  const Eigen::Index f = h.size();
  Eigen::VectorXd g(f);
  for (Eigen::Index k = 0; k < f; ++k) {
    g[k] = (k % 2 == 0 ? 1.0 : -1.0) * h[f - 1 - k];
  }
  return g;
}

Eigen::VectorXd db2_closed_form() {
  const double s3 = std::sqrt(3.0);
  const double den = 4.0 * std::sqrt(2.0);
  Eigen::VectorXd h(4);
  h << (1 + s3) / den, (3 + s3) / den, (3 - s3) / den, (1 - s3) / den;
  return h;
}

FilterBank make_filter_bank(WaveletFamily family, int order, int order_dual) {
  if (family == WaveletFamily::bior || family == WaveletFamily::rbio) {
    if (order == 2 && order_dual == 2) return cdf22(family == WaveletFamily::rbio);
    throw Error(ErrorCode::UnsupportedWavelet, std::string(family_prefix(family)) + std::to_string(order) +
                                                   "." + std::to_string(order_dual));
  }
  const std::string key = family_prefix(family) + std::to_string(order);
  const auto& tables = detail::orthogonal_tables();
  const auto it = tables.find(key);
  if (it == tables.end()) throw Error(ErrorCode::UnsupportedWavelet, key);

  FilterBank fb;
  fb.family = family;
  fb.order = order;
  fb.orthogonal = true;
  fb.h = to_vector(it->second);
  fb.g = qmf_highpass(fb.h);
  fb.h_syn = reversed(fb.h);
  fb.g_syn = reversed(fb.g);
  return fb;
}

FilterBank make_filter_bank(std::string_view name) {
  static const std::pair<const char*, WaveletFamily> prefixes[] = {
      {"coif", WaveletFamily::coif}, {"bior", WaveletFamily::bior}, {"rbio", WaveletFamily::rbio},
      {"sym", WaveletFamily::sym},   {"db", WaveletFamily::db},
  };
  for (const auto& [prefix, family] : prefixes) {
    const std::string_view p(prefix);
    if (name.substr(0, p.size()) != p) continue;
    const std::string rest(name.substr(p.size()));
    int order = 0;
    int dual = 0;
    std::size_t used = 0;
    try {
      order = std::stoi(rest, &used);
      if (family == WaveletFamily::bior || family == WaveletFamily::rbio) {
        if (used >= rest.size() || rest[used] != '.') throw std::invalid_argument("dual");
        std::size_t used2 = 0;
        dual = std::stoi(rest.substr(used + 1), &used2);
        used += 1 + used2;
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::UnsupportedWavelet, std::string(name));
    }
    if (used != rest.size()) throw Error(ErrorCode::UnsupportedWavelet, std::string(name));
    return make_filter_bank(family, order, dual);
  }
  throw Error(ErrorCode::UnsupportedWavelet, std::string(name));
}

std::vector<std::string> supported_wavelets() {
  std::vector<std::string> names;
  for (int p = 1; p <= 8; ++p) names.push_back("db" + std::to_string(p));
  for (int p = 2; p <= 8; ++p) names.push_back("sym" + std::to_string(p));
  for (int p = 1; p <= 3; ++p) names.push_back("coif" + std::to_string(p));
  names.emplace_back("bior2.2");
  names.emplace_back("rbio2.2");
  return names;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> synthesis_filters(const FilterBank& fb) {
  return {fb.h_syn, fb.g_syn};
}

FilterReport verify_filter_identities(const FilterBank& fb) {
  const Eigen::Index f = fb.length();
  FilterReport report;

  report.push_back({"sum_rule", std::abs(fb.h.sum() - std::sqrt(2.0)), 1e-10});

  if (fb.orthogonal) {
    double worst = 0.0;
    for (Eigen::Index m = 0; 2 * m < f; ++m) {
      const double s = fb.h.head(f - 2 * m).dot(fb.h.tail(f - 2 * m));
      worst = std::max(worst, std::abs(s - (m == 0 ? 1.0 : 0.0)));
    }
    report.push_back({"shift_orthonormality", worst, 1e-10});
    report.push_back({"qmf", (fb.g - qmf_highpass(fb.h)).cwiseAbs().maxCoeff(), 0.0});
  } else {
    report.push_back({"shift_orthonormality", std::nullopt, 1e-10});
    report.push_back({"qmf", std::nullopt, 0.0});
  }

  // Moments about the filter centre: equivalent to sum k^j g_k = 0 for all
  // j below the moment count, but far better conditioned for long filters.
  {
    const long double centre = static_cast<long double>(f - 1) / 2;
    double worst = 0.0;
    for (int j = 0; j < fb.vanishing_moments(); ++j) {
      long double s = 0;
      for (Eigen::Index k = 0; k < f; ++k) {
        s += std::pow(static_cast<long double>(k) - centre, j) * static_cast<long double>(fb.g[k]);
      }
      worst = std::max(worst, static_cast<double>(std::abs(s)));
    }
    report.push_back({"vanishing_moments", worst, 1e-8});
  }

  // Polyphase perfect reconstruction: for each input phase r,
  // sum_{k = r mod 2} h_k h~_{n-k} + g_k g~_{n-k} = delta_{n, F-1}.
  {
    double worst = 0.0;
    for (int phase = 0; phase < 2; ++phase) {
      for (Eigen::Index n = 0; n < 2 * f - 1; ++n) {
        double s = 0.0;
        for (Eigen::Index k = phase; k < f; k += 2) {
          const Eigen::Index j = n - k;
          if (j < 0 || j >= f) continue;
          s += fb.h[k] * fb.h_syn[j] + fb.g[k] * fb.g_syn[j];
        }
        worst = std::max(worst, std::abs(s - (n == f - 1 ? 1.0 : 0.0)));
      }
    }
    report.push_back({"perfect_reconstruction", worst, 1e-10});
  }
  return report;
}

bool all_passed(const FilterReport& report) {
  return std::all_of(report.begin(), report.end(), [](const IdentityCheck& c) { return c.passed(); });
}

const IdentityCheck& find_check(const FilterReport& report, std::string_view name) {
  for (const auto& c : report) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::InvalidConfig, "no identity named " + std::string(name));
}

}  // namespace wdiff
