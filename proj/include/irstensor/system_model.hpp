#pragma once

#include "irstensor/types.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace irstensor {

enum class ChannelModel { IidRayleigh, Geometric };

// Hardware-impairment model for the reflecting surface: each realized phase
// entry is the designed one times a Bernoulli(1 - blockage_fraction) on/off
// draw and a CN(0, gamma) fading term.
struct PerturbationConfig {
  double blockage_fraction = 0.0;
  double gamma = 0.0;
};

struct SystemConfig {
  int M = 1;  // station antennas (pilot-side factor columns)
  int L = 1;  // terminal antennas (mode-1 factor rows)
  int N = 1;  // reflecting elements
  int K = 1;  // phase-configuration blocks
  int T = 1;  // pilot slots per block
  double snr_db = 0.0;  // +inf => noiseless
  ChannelModel channel_model = ChannelModel::IidRayleigh;
  int R1 = 1;  // station-surface paths (geometric model)
  int R2 = 1;  // surface-terminal paths (geometric model)
  int U = 1;   // terminals (stacked-terminal layout when > 1)
  int P = 1;   // stations (stacked-station layout when > 1)
  std::optional<PerturbationConfig> perturbation;
  // Permit random-phase designs when K < N or T < (pilot columns); the
  // default insists on orthogonal truncated-DFT designs.
  bool allow_nonorthogonal_design = false;

  bool noiseless() const { return std::isinf(snr_db) && snr_db > 0; }
  void validate() const;  // throws ShapeError / DesignError
};

// Factored form of a geometric (low-rank) channel pair:
//   H = surface_rx * diag(alpha) * station_tx^H   (N x M, rank R1)
//   G = terminal_rx * diag(beta) * surface_tx^H   (L x N, rank R2)
struct GeometricChannelParams {
  ComplexMatrix surface_rx;   // N x R1
  ComplexMatrix station_tx;   // M x R1
  ComplexVector alpha;        // R1
  ComplexMatrix terminal_rx;  // L x R2
  ComplexMatrix surface_tx;   // N x R2
  ComplexVector beta;         // R2
};

struct ChannelPair {
  ComplexMatrix h;  // N x M (station -> surface)
  ComplexMatrix g;  // L x N (surface -> terminal)
  std::optional<GeometricChannelParams> geometric;
};

// One synthesized realization. The estimation-facing view is generic over the
// stacked layouts: the tensor has dims (d1, T, K) with mode-1 factor g_eff
// (d1 x N) and pilot-side factor h_eff (N x d2) such that z = x * h_eff^T.
//   single-terminal: d1 = L, d2 = M,   g_eff = G,                  h_eff = H
//   stacked-terminal (U > 1, P = 1): d1 = M, d2 = U*L,
//     g_eff = H^T, h_eff = [G_1; ...; G_U]^T
//   stacked-station (P > 1): d1 = P*M, g_eff = [H_1^T; ...; H_P^T]
struct Scenario {
  SystemConfig config;
  std::vector<ComplexMatrix> h_list;  // P entries, each N x M
  std::vector<ComplexMatrix> g_list;  // U entries, each L x N
  std::optional<GeometricChannelParams> geometric;
  ComplexMatrix s_ideal;   // K x N design handed to receivers
  ComplexMatrix s_actual;  // realized phases (== s_ideal when unperturbed)
  ComplexMatrix x;         // effective pilots, T x d2
  ComplexMatrix h_eff;     // N x d2
  ComplexMatrix g_eff;     // d1 x N
  Tensor3 y_clean;         // noiseless tensor
  Tensor3 y;               // noisy observation
  Tensor3 b;               // additive noise (zero when noiseless)
  double sigma2 = 0.0;     // per-entry noise variance realized in b

  Index d1() const { return g_eff.rows(); }
  Index d2() const { return x.cols(); }
  // Composite-channel parameter vec(h_eff^T kr g_eff), length d2 * N * d1.
  ComplexVector theta() const;
};

// Truncated DFT matrix, entries exp(-2*pi*i*r*c / rows); columns orthogonal
// with A^H A = rows * I whenever cols <= rows.
ComplexMatrix make_dft_matrix(Index rows, Index cols);

// Unit-modulus entries with i.i.d. uniform phases.
ComplexMatrix make_random_phase_matrix(Index rows, Index cols, Rng& rng);

// Half-wavelength uniform linear array response, entries exp(i*pi*m*sin(az)).
ComplexVector ula_response(Index elements, double azimuth);

// Rectangular surface response: Kronecker of two half-wavelength linear
// responses in the direction cosines (sin az * cos el, sin el), on a
// ceil(sqrt(n)) x ceil(n / ceil(sqrt(n))) grid truncated to n entries.
ComplexVector ura_response(Index elements, double azimuth, double elevation);

// Draw one channel pair per the configured model. Geometric draws azimuth
// angles Uniform[-pi/2, pi/2), elevations Uniform[0, pi/2), path gains
// CN(0,1).
ChannelPair draw_channels(const SystemConfig& cfg, Rng& rng);

// Realized phase matrix under the impairment model (see PerturbationConfig).
ComplexMatrix apply_perturbation(const ComplexMatrix& s_ideal,
                                 const PerturbationConfig& pert, Rng& rng);

// Synthesize one single-terminal realization (U = P = 1).
Scenario build_scenario(const SystemConfig& cfg, Rng& rng);

// Stacked-terminal uplink: U terminals sharing the frame, pilots stacked to a
// T x (U*L) block design (needs T >= U*L unless overridden). i.i.d. model only.
Scenario build_multiuser_scenario(const SystemConfig& cfg, Rng& rng);

// Stacked-station variant on top of the stacked-terminal layout: P station
// channels stacked along mode 1. P = 1 coincides with the stacked-terminal
// builder. i.i.d. model only.
Scenario build_multibs_scenario(const SystemConfig& cfg, Rng& rng);

// Dispatch on (U, P) in the config.
Scenario synthesize_scenario(const SystemConfig& cfg, Rng& rng);

// Binary round-trip of a full scenario (exact to the bit).
void save_scenario(const Scenario& sc, const std::string& path);
Scenario load_scenario(const std::string& path);

}  // namespace irstensor
