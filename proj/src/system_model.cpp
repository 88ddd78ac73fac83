#include "irstensor/system_model.hpp"

#include "irstensor/tensor_ops.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace irstensor {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void SystemConfig::validate() const {
  if (M < 1 || L < 1 || N < 1 || K < 1 || T < 1)
    throw ShapeError("SystemConfig: M, L, N, K, T must be >= 1");
  if (U < 1 || P < 1) throw ShapeError("SystemConfig: U and P must be >= 1");
  if (std::isnan(snr_db) || (std::isinf(snr_db) && snr_db < 0))
    throw ShapeError("SystemConfig: snr_db must be finite or +inf");
  if (channel_model == ChannelModel::Geometric) {
    if (R1 < 1 || R1 > std::min(N, M))
      throw ShapeError("SystemConfig: R1 must lie in [1, min(N, M)]");
    if (R2 < 1 || R2 > std::min(L, N))
      throw ShapeError("SystemConfig: R2 must lie in [1, min(L, N)]");
    if (U > 1 || P > 1)
      throw DesignError(
          "SystemConfig: geometric channels are single-terminal only");
  }
  if (perturbation) {
    if (perturbation->blockage_fraction < 0.0 ||
        perturbation->blockage_fraction > 1.0)
      throw ShapeError("SystemConfig: blockage_fraction must lie in [0, 1]");
    if (perturbation->gamma < 0.0)
      throw ShapeError("SystemConfig: gamma must be >= 0");
  }
}

ComplexVector Scenario::theta() const {
  return vec(khatri_rao(h_eff.transpose(), g_eff));
}

ComplexMatrix make_dft_matrix(Index rows, Index cols) {
  if (rows < 1 || cols < 1)
    throw ShapeError("make_dft_matrix: dimensions must be positive");
  ComplexMatrix a(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) {
      const double ang = -2.0 * kPi * static_cast<double>(r) *
                         static_cast<double>(c) / static_cast<double>(rows);
      a(r, c) = Complex(std::cos(ang), std::sin(ang));
    }
  return a;
}

ComplexMatrix make_random_phase_matrix(Index rows, Index cols, Rng& rng) {
  ComplexMatrix a(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) a(r, c) = rng.unit_phase();
  return a;
}

ComplexVector ula_response(Index elements, double azimuth) {
  ComplexVector a(elements);
  const double step = kPi * std::sin(azimuth);
  for (Index m = 0; m < elements; ++m) {
    const double ang = step * static_cast<double>(m);
    a[m] = Complex(std::cos(ang), std::sin(ang));
  }
  return a;
}

ComplexVector ura_response(Index elements, double azimuth, double elevation) {
  const Index n1 = static_cast<Index>(
      std::ceil(std::sqrt(static_cast<double>(elements))));
  const Index n2 = (elements + n1 - 1) / n1;  // ceil(elements / n1)
  const double u = std::sin(azimuth) * std::cos(elevation);
  const double v = std::sin(elevation);
  ComplexVector a1(n1), a2(n2);
  for (Index m = 0; m < n1; ++m) {
    const double ang = kPi * u * static_cast<double>(m);
    a1[m] = Complex(std::cos(ang), std::sin(ang));
  }
  for (Index m = 0; m < n2; ++m) {
    const double ang = kPi * v * static_cast<double>(m);
    a2[m] = Complex(std::cos(ang), std::sin(ang));
  }
  ComplexVector full(n1 * n2);
  for (Index i = 0; i < n1; ++i) full.segment(i * n2, n2) = a1[i] * a2;
  return full.head(elements);
}

ChannelPair draw_channels(const SystemConfig& cfg, Rng& rng) {
  ChannelPair cp;
  if (cfg.channel_model == ChannelModel::IidRayleigh) {
    cp.h = rng.cnormal_matrix(cfg.N, cfg.M);
    cp.g = rng.cnormal_matrix(cfg.L, cfg.N);
    return cp;
  }
  GeometricChannelParams gp;
  gp.surface_rx.resize(cfg.N, cfg.R1);
  gp.station_tx.resize(cfg.M, cfg.R1);
  for (int r = 0; r < cfg.R1; ++r) {
    const double az_station = rng.uniform(-kPi / 2, kPi / 2);
    const double az_surface = rng.uniform(-kPi / 2, kPi / 2);
    const double el_surface = rng.uniform(0.0, kPi / 2);
    gp.station_tx.col(r) = ula_response(cfg.M, az_station);
    gp.surface_rx.col(r) = ura_response(cfg.N, az_surface, el_surface);
  }
  gp.alpha = rng.cnormal_matrix(cfg.R1, 1);
  gp.terminal_rx.resize(cfg.L, cfg.R2);
  gp.surface_tx.resize(cfg.N, cfg.R2);
  for (int r = 0; r < cfg.R2; ++r) {
    const double az_terminal = rng.uniform(-kPi / 2, kPi / 2);
    const double az_surface = rng.uniform(-kPi / 2, kPi / 2);
    const double el_surface = rng.uniform(0.0, kPi / 2);
    gp.terminal_rx.col(r) = ula_response(cfg.L, az_terminal);
    gp.surface_tx.col(r) = ura_response(cfg.N, az_surface, el_surface);
  }
  gp.beta = rng.cnormal_matrix(cfg.R2, 1);
  cp.h = gp.surface_rx * gp.alpha.asDiagonal() * gp.station_tx.adjoint();
  cp.g = gp.terminal_rx * gp.beta.asDiagonal() * gp.surface_tx.adjoint();
  cp.geometric = std::move(gp);
  return cp;
}

ComplexMatrix apply_perturbation(const ComplexMatrix& s_ideal,
                                 const PerturbationConfig& pert, Rng& rng) {
  ComplexMatrix s = s_ideal;
  const double sg = std::sqrt(pert.gamma);
  for (Index c = 0; c < s.cols(); ++c)
    for (Index r = 0; r < s.rows(); ++r) {
      const bool open = !rng.bernoulli(pert.blockage_fraction);
      const Complex fade = sg * rng.cnormal();
      s(r, c) *= open ? fade : Complex(0.0, 0.0);
    }
  return s;
}

namespace {

// Orthogonal design when feasible, random-phase fallback when permitted.
ComplexMatrix make_design(Index rows, Index cols, bool allow_fallback,
                          Rng& rng, const char* what) {
  if (cols <= rows) return make_dft_matrix(rows, cols);
  if (allow_fallback) return make_random_phase_matrix(rows, cols, rng);
  throw DesignError(std::string("build scenario: ") + what +
                    " needs at least as many rows as columns for an "
                    "orthogonal design (set allow_nonorthogonal_design to "
                    "use random phases)");
}

// Common tail: realized phases, clean tensor, exact-SNR noise.
void finish_scenario(Scenario& sc, Rng& rng) {
  const SystemConfig& cfg = sc.config;
  sc.s_ideal = make_design(cfg.K, cfg.N, cfg.allow_nonorthogonal_design, rng,
                           "phase design S");
  sc.s_actual = cfg.perturbation
                    ? apply_perturbation(sc.s_ideal, *cfg.perturbation, rng)
                    : sc.s_ideal;
  ComplexMatrix z = sc.x * sc.h_eff.transpose();
  sc.y_clean = build_parafac_tensor(sc.g_eff, z, sc.s_actual);

  const Index d1 = sc.d1();
  sc.b = Tensor3(d1, cfg.T, cfg.K);
  if (cfg.noiseless()) {
    sc.sigma2 = 0.0;
    sc.y = sc.y_clean;
    return;
  }
  ComplexVector raw(sc.b.size());
  for (Index i = 0; i < raw.size(); ++i) raw[i] = rng.cnormal();
  const double signal2 = sc.y_clean.squared_norm();
  const double target2 = signal2 * std::pow(10.0, -cfg.snr_db / 10.0);
  const double raw2 = raw.squaredNorm();
  const double scale = raw2 > 0.0 ? std::sqrt(target2 / raw2) : 0.0;
  sc.b.data() = scale * raw;
  sc.sigma2 = target2 / static_cast<double>(sc.b.size());
  sc.y = sc.y_clean + sc.b;
}

Scenario build_stacked(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  Scenario sc;
  sc.config = cfg;
  const Index cols = static_cast<Index>(cfg.U) * cfg.L;
  // Pilots are drawn/constructed before the channels so the stream layout is
  // stable across channel models.
  sc.x = make_design(cfg.T, cols, cfg.allow_nonorthogonal_design, rng,
                     "stacked pilot design");
  for (int p = 0; p < cfg.P; ++p)
    sc.h_list.push_back(rng.cnormal_matrix(cfg.N, cfg.M));
  for (int u = 0; u < cfg.U; ++u)
    sc.g_list.push_back(rng.cnormal_matrix(cfg.L, cfg.N));

  ComplexMatrix g_stack(cols, cfg.N);  // [G_1; ...; G_U]
  for (int u = 0; u < cfg.U; ++u)
    g_stack.middleRows(static_cast<Index>(u) * cfg.L, cfg.L) = sc.g_list[u];
  sc.h_eff = g_stack.transpose();  // N x (U*L)

  sc.g_eff.resize(static_cast<Index>(cfg.P) * cfg.M, cfg.N);
  for (int p = 0; p < cfg.P; ++p)
    sc.g_eff.middleRows(static_cast<Index>(p) * cfg.M, cfg.M) =
        sc.h_list[p].transpose();

  finish_scenario(sc, rng);
  return sc;
}

}  // namespace

Scenario build_scenario(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.U != 1 || cfg.P != 1)
    throw ShapeError("build_scenario: single-terminal builder needs U = P = 1");
  Scenario sc;
  sc.config = cfg;
  sc.x = make_design(cfg.T, cfg.M, cfg.allow_nonorthogonal_design, rng,
                     "pilot design X");
  ChannelPair cp = draw_channels(cfg, rng);
  sc.h_list.push_back(cp.h);
  sc.g_list.push_back(cp.g);
  sc.geometric = std::move(cp.geometric);
  sc.h_eff = sc.h_list[0];
  sc.g_eff = sc.g_list[0];
  finish_scenario(sc, rng);
  return sc;
}

Scenario build_multiuser_scenario(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.P != 1)
    throw ShapeError("build_multiuser_scenario: needs P = 1");
  return build_stacked(cfg, rng);
}

Scenario build_multibs_scenario(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  return build_stacked(cfg, rng);
}

Scenario synthesize_scenario(const SystemConfig& cfg, Rng& rng) {
  if (cfg.P > 1) return build_multibs_scenario(cfg, rng);
  if (cfg.U > 1) return build_multiuser_scenario(cfg, rng);
  return build_scenario(cfg, rng);
}

// ---- binary round-trip ----

namespace {

constexpr std::uint64_t kMagic = 0x4952535453434E31ull;  // "IRSTSCN1"

void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::int64_t get_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void put_matrix(std::ostream& os, const ComplexMatrix& m) {
  put_i64(os, m.rows());
  put_i64(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(Complex) * m.size()));
}
ComplexMatrix get_matrix(std::istream& is) {
  const Index rows = get_i64(is), cols = get_i64(is);
  if (rows < 0 || cols < 0 || !is)
    throw std::runtime_error("scenario file: corrupt matrix header");
  ComplexMatrix m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(Complex) * m.size()));
  return m;
}

void put_tensor(std::ostream& os, const Tensor3& t) {
  put_i64(os, t.dim1());
  put_i64(os, t.dim2());
  put_i64(os, t.dim3());
  os.write(reinterpret_cast<const char*>(t.data().data()),
           static_cast<std::streamsize>(sizeof(Complex) * t.size()));
}
Tensor3 get_tensor(std::istream& is) {
  const Index d1 = get_i64(is), d2 = get_i64(is), d3 = get_i64(is);
  if (d1 < 1 || d2 < 1 || d3 < 1 || !is)
    throw std::runtime_error("scenario file: corrupt tensor header");
  Tensor3 t(d1, d2, d3);
  is.read(reinterpret_cast<char*>(t.data().data()),
          static_cast<std::streamsize>(sizeof(Complex) * t.size()));
  return t;
}

}  // namespace

void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_scenario: cannot open " + path);
  put_u64(os, kMagic);
  const SystemConfig& c = sc.config;
  put_i64(os, c.M);
  put_i64(os, c.L);
  put_i64(os, c.N);
  put_i64(os, c.K);
  put_i64(os, c.T);
  put_f64(os, c.snr_db);
  put_i64(os, c.channel_model == ChannelModel::Geometric ? 1 : 0);
  put_i64(os, c.R1);
  put_i64(os, c.R2);
  put_i64(os, c.U);
  put_i64(os, c.P);
  put_i64(os, c.perturbation ? 1 : 0);
  put_f64(os, c.perturbation ? c.perturbation->blockage_fraction : 0.0);
  put_f64(os, c.perturbation ? c.perturbation->gamma : 0.0);
  put_i64(os, c.allow_nonorthogonal_design ? 1 : 0);

  put_i64(os, static_cast<std::int64_t>(sc.h_list.size()));
  for (const auto& m : sc.h_list) put_matrix(os, m);
  put_i64(os, static_cast<std::int64_t>(sc.g_list.size()));
  for (const auto& m : sc.g_list) put_matrix(os, m);
  put_i64(os, sc.geometric ? 1 : 0);
  if (sc.geometric) {
    put_matrix(os, sc.geometric->surface_rx);
    put_matrix(os, sc.geometric->station_tx);
    put_matrix(os, sc.geometric->alpha);
    put_matrix(os, sc.geometric->terminal_rx);
    put_matrix(os, sc.geometric->surface_tx);
    put_matrix(os, sc.geometric->beta);
  }
  put_matrix(os, sc.s_ideal);
  put_matrix(os, sc.s_actual);
  put_matrix(os, sc.x);
  put_matrix(os, sc.h_eff);
  put_matrix(os, sc.g_eff);
  put_tensor(os, sc.y_clean);
  put_tensor(os, sc.y);
  put_tensor(os, sc.b);
  put_f64(os, sc.sigma2);
  if (!os) throw std::runtime_error("save_scenario: write failed for " + path);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_scenario: cannot open " + path);
  if (get_u64(is) != kMagic)
    throw std::runtime_error("load_scenario: bad magic in " + path);
  Scenario sc;
  SystemConfig& c = sc.config;
  c.M = static_cast<int>(get_i64(is));
  c.L = static_cast<int>(get_i64(is));
  c.N = static_cast<int>(get_i64(is));
  c.K = static_cast<int>(get_i64(is));
  c.T = static_cast<int>(get_i64(is));
  c.snr_db = get_f64(is);
  c.channel_model =
      get_i64(is) ? ChannelModel::Geometric : ChannelModel::IidRayleigh;
  c.R1 = static_cast<int>(get_i64(is));
  c.R2 = static_cast<int>(get_i64(is));
  c.U = static_cast<int>(get_i64(is));
  c.P = static_cast<int>(get_i64(is));
  const bool has_pert = get_i64(is) != 0;
  const double blockage = get_f64(is);
  const double gamma = get_f64(is);
  if (has_pert) c.perturbation = PerturbationConfig{blockage, gamma};
  c.allow_nonorthogonal_design = get_i64(is) != 0;

  const auto hcount = get_i64(is);
  for (std::int64_t i = 0; i < hcount; ++i) sc.h_list.push_back(get_matrix(is));
  const auto gcount = get_i64(is);
  for (std::int64_t i = 0; i < gcount; ++i) sc.g_list.push_back(get_matrix(is));
  if (get_i64(is)) {
    GeometricChannelParams gp;
    gp.surface_rx = get_matrix(is);
    gp.station_tx = get_matrix(is);
    gp.alpha = get_matrix(is);
    gp.terminal_rx = get_matrix(is);
    gp.surface_tx = get_matrix(is);
    gp.beta = get_matrix(is);
    sc.geometric = std::move(gp);
  }
  sc.s_ideal = get_matrix(is);
  sc.s_actual = get_matrix(is);
  sc.x = get_matrix(is);
  sc.h_eff = get_matrix(is);
  sc.g_eff = get_matrix(is);
  sc.y_clean = get_tensor(is);
  sc.y = get_tensor(is);
  sc.b = get_tensor(is);
  sc.sigma2 = get_f64(is);
  if (!is) throw std::runtime_error("load_scenario: truncated file " + path);
  return sc;
}

}  // namespace irstensor
