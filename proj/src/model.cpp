#include "wpcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace wpcn {

namespace {

constexpr double kPi = std::numbers::pi;

template <class T>
Grid2<T> filled(int K, int N, T v) {
  return Grid2<T>(static_cast<std::size_t>(K), std::vector<T>(static_cast<std::size_t>(N), v));
}

double planar_dist(std::pair<double, double> a, std::pair<double, double> b) {
  return std::hypot(a.first - b.first, a.second - b.second);
}

}  // namespace

void EhParams::validate() const {
  require(p_floor > 0.0, "eh.p_floor must be positive");
  if (mode == EhMode::Nonlinear) {
    require(a < 0.0 && b < 0.0, "nonlinear EH fit requires a < 0 and b < 0");
  } else {
    require(zeta > 0.0, "linear EH efficiency must be positive");
  }
}

void GeometrySpec::validate(int K, int N) const {
  require(d0 > 0.0, "geometry.d0 must be positive");
  require(amplitude_scale > 0.0, "geometry.amplitude_scale must be positive");
  require(static_cast<int>(d_hap_user.size()) == K, "d_hap_user must have K rows");
  require(static_cast<int>(d_user_ch.size()) == K, "d_user_ch must have K rows");
  for (int k = 0; k < K; ++k) {
    require(static_cast<int>(d_hap_user[k].size()) == N, "d_hap_user row must have N entries");
    for (double d : d_hap_user[k]) require(d >= d0, "HAP-user distance below d0");
    require(static_cast<int>(d_user_ch[k].size()) == N - 1, "d_user_ch[k] must have N-1 rows");
    for (const auto& row : d_user_ch[k]) {
      require(static_cast<int>(row.size()) == K, "d_user_ch[k][n] must have K entries");
      for (double d : row) require(d >= d0, "user-CH distance below d0");
    }
  }
}

void NetworkConfig::validate() const {
  require(K >= 1, "K must be >= 1");
  require(N >= 2, "N must be >= 2");
  require(M_h >= 1, "M_h must be >= 1");
  require(static_cast<int>(M.size()) == K, "M must have K rows");
  require(static_cast<int>(Pc.size()) == K, "Pc must have K rows");
  require(static_cast<int>(eta.size()) == K, "eta must have K rows");
  for (int k = 0; k < K; ++k) {
    require(static_cast<int>(M[k].size()) == N, "M row must have N entries");
    require(static_cast<int>(Pc[k].size()) == N, "Pc row must have N entries");
    require(static_cast<int>(eta[k].size()) == N, "eta row must have N entries");
    for (int n = 0; n < N; ++n) {
      require(M[k][n] >= 1, "antenna counts must be >= 1");
      require(Pc[k][n] >= 0.0, "circuit power must be >= 0");
      require(eta[k][n] > 0.0, "amplifier factor must be > 0");
    }
  }
  require(p0 > 0.0, "p0 must be positive");
  require(T > 0.0, "T must be positive");
  require(tau1 >= 0.0 && tau1 < T, "tau1 must lie in [0, T)");
  require(noise_uch > 0.0 && noise_uhap > 0.0 && noise_chhap > 0.0, "noise powers must be positive");
  require(rho_h >= 0.0 && rho_h <= 1.0 && rho_g >= 0.0 && rho_g <= 1.0, "rho must lie in [0, 1]");
  require(alpha > 0.0, "alpha must be positive");
  require(bandwidth_hz > 0.0, "bandwidth must be positive");
  eh.validate();
  geometry.validate(K, N);
}

double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

void fill_uniform(NetworkConfig& cfg, int M, double Pc, double eta) {
  cfg.M = filled(cfg.K, cfg.N, M);
  cfg.Pc = filled(cfg.K, cfg.N, Pc);
  cfg.eta = filled(cfg.K, cfg.N, eta);
}

NetworkConfig default_config() {
  NetworkConfig cfg;
  cfg.K = 4;
  cfg.N = 2;
  cfg.M_h = 4;
  fill_uniform(cfg, 4, dbm_to_watt(-23.0), 1.0);
  const double s2 = dbm_to_watt(-80.0);
  cfg.noise_uch = cfg.noise_uhap = cfg.noise_chhap = s2;
  cfg.geometry.d0 = 1.0;
  cfg.geometry.amplitude_scale = 0.1;
  cfg.geometry = build_geometry(cfg, 0.5, 30.0);
  return cfg;
}

NetworkConfig scalar_config() {
  NetworkConfig cfg = default_config();
  cfg.K = 1;
  cfg.N = 2;
  cfg.M_h = 1;
  fill_uniform(cfg, 1, dbm_to_watt(-40.0), 1.0);
  cfg.geometry = build_geometry(cfg, 0.5, 30.0);
  return cfg;
}

GeometrySpec build_geometry(const NetworkConfig& cfg_base, double gamma, double theta_deg,
                            double d_far, bool floor_at_d0) {
  const int K = cfg_base.K;
  const int N = cfg_base.N;
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(theta_deg > 0.0 && theta_deg < 360.0 / K, "theta must lie in (0, 360/K)");
  require(d_far > 0.0, "d_far must be positive");

  GeometrySpec g;
  g.d0 = cfg_base.geometry.d0 > 0.0 ? cfg_base.geometry.d0 : 1.0;
  g.amplitude_scale = cfg_base.geometry.amplitude_scale > 0.0 ? cfg_base.geometry.amplitude_scale : 0.1;

  std::vector<double> ang(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) ang[k] = (k - 0.5 * (K - 1)) * theta_deg * kPi / 180.0;

  // Polar positions (radius, angle).
  auto radius = [&](int n) { return n == N - 1 ? gamma * d_far : d_far; };

  g.d_hap_user = filled(K, N, 0.0);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) g.d_hap_user[k][n] = floor_at_d0 ? std::max(radius(n), g.d0) : radius(n);

  g.d_user_ch.assign(K, Grid2<double>(N - 1, std::vector<double>(K, 0.0)));
  for (int k = 0; k < K; ++k) {
    const double rc = radius(N - 1);
    for (int n = 0; n < N - 1; ++n) {
      for (int i = 0; i < K; ++i) {
        const double ru = radius(n);
        const double d2 = ru * ru + rc * rc - 2.0 * ru * rc * std::cos(ang[i] - ang[k]);
        const double d = std::sqrt(std::max(d2, 0.0));
        if (floor_at_d0) {
          g.d_user_ch[k][n][i] = std::max(d, g.d0);
          continue;
        }
        if (d < 1e-9) throw InvalidArgument("geometry places a user on top of a cluster head");
        g.d_user_ch[k][n][i] = d;
      }
    }
  }
  g.validate(K, N);
  return g;
}

DiskLayout sample_disk_layout(int K, int N, std::uint64_t seed, double radius, double centre_dist) {
  require(K >= 1 && N >= 2, "disk layout needs K >= 1, N >= 2");
  DiskLayout out;
  // Centres on a circle of radius centre_dist around the HAP; neighbouring
  // centres centre_dist apart (60 degree spacing), as far as K allows.
  const double step = kPi / 3.0;
  for (int k = 0; k < K; ++k) {
    const double a = (k - 0.5 * (K - 1)) * step;
    out.centres.emplace_back(centre_dist * std::cos(a), centre_dist * std::sin(a));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  out.pos.assign(K, {});
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) {
      const double r = radius * std::sqrt(u01(rng));
      const double t = 2.0 * kPi * u01(rng);
      out.pos[k].emplace_back(out.centres[k].first + r * std::cos(t),
                              out.centres[k].second + r * std::sin(t));
    }
  }
  return out;
}

DiskLayout assign_cluster_heads(DiskLayout layout, ChRule rule) {
  const std::pair<double, double> hap{0.0, 0.0};
  for (std::size_t k = 0; k < layout.pos.size(); ++k) {
    auto& users = layout.pos[k];
    const auto ref = rule == ChRule::NearestToHap ? hap : layout.centres[k];
    std::size_t best = 0;
    for (std::size_t n = 1; n < users.size(); ++n)
      if (planar_dist(users[n], ref) < planar_dist(users[best], ref)) best = n;
    std::swap(users[best], users.back());
  }
  return layout;
}

GeometrySpec geometry_from_positions(const DiskLayout& layout, double d0, double amplitude_scale) {
  const int K = static_cast<int>(layout.pos.size());
  require(K >= 1, "empty layout");
  const int N = static_cast<int>(layout.pos[0].size());
  GeometrySpec g;
  g.d0 = d0;
  g.amplitude_scale = amplitude_scale;
  const std::pair<double, double> hap{0.0, 0.0};
  g.d_hap_user = filled(K, N, 0.0);
  g.d_user_ch.assign(K, Grid2<double>(N - 1, std::vector<double>(K, 0.0)));
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) g.d_hap_user[k][n] = std::max(d0, planar_dist(layout.pos[k][n], hap));
    for (int n = 0; n < N - 1; ++n)
      for (int i = 0; i < K; ++i)
        g.d_user_ch[k][n][i] = std::max(d0, planar_dist(layout.pos[i][n], layout.pos[k][N - 1]));
  }
  return g;
}

double path_gain(const GeometrySpec& g, double d, double alpha) {
  return g.amplitude_scale * g.amplitude_scale * std::pow(d / g.d0, -alpha);
}

namespace {

CMat gaussian_matrix(std::mt19937_64& rng, int rows, int cols, double var) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const double s = std::sqrt(var / 2.0);
  CMat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = nd(rng);
      const double im = nd(rng);
      m(i, j) = cplx(s * re, s * im);
    }
  return m;
}

}  // namespace

ChannelSet sample_channels(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int K = cfg.K;
  const int N = cfg.N;
  std::mt19937_64 rng(seed);
  ChannelSet ch;
  ch.H_hat.assign(K, std::vector<CMat>(N));
  ch.var_h_delta = filled(K, N, 0.0);
  const double rh2 = cfg.rho_h * cfg.rho_h;
  const double rg2 = cfg.rho_g * cfg.rho_g;
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const double var = path_gain(cfg.geometry, cfg.geometry.d_hap_user[k][n], cfg.alpha);
      ch.H_hat[k][n] = gaussian_matrix(rng, cfg.M[k][n], cfg.M_h, rh2 * var);
      ch.var_h_delta[k][n] = (1.0 - rh2) * var;
    }
  ch.G_hat.assign(K, Grid2<CMat>(N - 1, std::vector<CMat>(K)));
  ch.var_g_delta.assign(K, Grid2<double>(N - 1, std::vector<double>(K, 0.0)));
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N - 1; ++n)
      for (int i = 0; i < K; ++i) {
        const double var = path_gain(cfg.geometry, cfg.geometry.d_user_ch[k][n][i], cfg.alpha);
        ch.G_hat[k][n][i] = gaussian_matrix(rng, cfg.M[k][N - 1], cfg.M[i][n], rg2 * var);
        ch.var_g_delta[k][n][i] = (1.0 - rg2) * var;
      }
  return ch;
}

ChannelSet without_error_terms(ChannelSet ch) {
  for (auto& row : ch.var_h_delta) std::fill(row.begin(), row.end(), 0.0);
  for (auto& blk : ch.var_g_delta)
    for (auto& row : blk) std::fill(row.begin(), row.end(), 0.0);
  return ch;
}

void check_dimensions(const NetworkConfig& cfg, const ChannelSet& ch) {
  const int K = cfg.K;
  const int N = cfg.N;
  require(static_cast<int>(ch.H_hat.size()) == K && static_cast<int>(ch.G_hat.size()) == K,
          "channel set has wrong cluster count");
  for (int k = 0; k < K; ++k) {
    require(static_cast<int>(ch.H_hat[k].size()) == N, "channel set has wrong user count");
    for (int n = 0; n < N; ++n) {
      require(ch.H_hat[k][n].rows() == cfg.M[k][n] && ch.H_hat[k][n].cols() == cfg.M_h,
              "H_hat dimension mismatch");
      require(ch.var_h_delta[k][n] >= 0.0, "negative error variance");
    }
    require(static_cast<int>(ch.G_hat[k].size()) == N - 1, "G_hat has wrong slot count");
    for (int n = 0; n < N - 1; ++n)
      for (int i = 0; i < K; ++i) {
        require(ch.G_hat[k][n][i].rows() == cfg.M[k][N - 1] && ch.G_hat[k][n][i].cols() == cfg.M[i][n],
                "G_hat dimension mismatch");
        require(ch.var_g_delta[k][n][i] >= 0.0, "negative error variance");
      }
  }
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

using nlohmann::json;

template <class T>
Grid2<T> grid_or_scalar(const json& j, int K, int N) {
  if (j.is_array()) return j.get<Grid2<T>>();
  return filled(K, N, j.get<T>());
}

}  // namespace

NetworkConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config parse error: ") + e.what());
  }
  NetworkConfig cfg = default_config();
  try {
    cfg.K = j.value("K", cfg.K);
    cfg.N = j.value("N", cfg.N);
    cfg.M_h = j.value("M_h", cfg.M_h);
    cfg.M = j.contains("M") ? grid_or_scalar<int>(j["M"], cfg.K, cfg.N) : filled(cfg.K, cfg.N, 4);
    const double pc_default = dbm_to_watt(-23.0);
    if (j.contains("Pc_dbm")) {
      cfg.Pc = filled(cfg.K, cfg.N, dbm_to_watt(j["Pc_dbm"].get<double>()));
    } else {
      cfg.Pc = j.contains("Pc") ? grid_or_scalar<double>(j["Pc"], cfg.K, cfg.N)
                                : filled(cfg.K, cfg.N, pc_default);
    }
    cfg.eta = j.contains("eta") ? grid_or_scalar<double>(j["eta"], cfg.K, cfg.N) : filled(cfg.K, cfg.N, 1.0);
    cfg.p0 = j.value("p0", cfg.p0);
    cfg.T = j.value("T", cfg.T);
    cfg.tau1 = j.value("tau1", cfg.tau1);
    if (j.contains("noise_dbm")) {
      const double s2 = dbm_to_watt(j["noise_dbm"].get<double>());
      cfg.noise_uch = cfg.noise_uhap = cfg.noise_chhap = s2;
    }
    cfg.noise_uch = j.value("noise_uch", cfg.noise_uch);
    cfg.noise_uhap = j.value("noise_uhap", cfg.noise_uhap);
    cfg.noise_chhap = j.value("noise_chhap", cfg.noise_chhap);
    if (j.contains("rho")) cfg.rho_h = cfg.rho_g = j["rho"].get<double>();
    cfg.rho_h = j.value("rho_h", cfg.rho_h);
    cfg.rho_g = j.value("rho_g", cfg.rho_g);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.bandwidth_hz = j.value("bandwidth_hz", cfg.bandwidth_hz);
    if (j.contains("eh")) {
      const auto& e = j["eh"];
      cfg.eh.a = e.value("a", cfg.eh.a);
      cfg.eh.b = e.value("b", cfg.eh.b);
      cfg.eh.c = e.value("c", cfg.eh.c);
      cfg.eh.zeta = e.value("zeta", cfg.eh.zeta);
      cfg.eh.p_floor = e.value("p_floor", cfg.eh.p_floor);
      const std::string mode = e.value("mode", std::string("nonlinear"));
      require(mode == "nonlinear" || mode == "linear", "eh.mode must be nonlinear or linear");
      cfg.eh.mode = mode == "linear" ? EhMode::Linear : EhMode::Nonlinear;
    }
    const json geo = j.value("geometry", json::object());
    cfg.geometry.d0 = geo.value("d0", 1.0);
    cfg.geometry.amplitude_scale = geo.value("amplitude_scale", 0.1);
    const std::string layout = geo.value("layout", std::string("rays"));
    if (layout == "rays") {
      cfg.geometry = build_geometry(cfg, geo.value("gamma", 0.5), geo.value("theta_deg", 30.0),
                                    geo.value("d_far", 10.0), geo.value("floor_at_d0", false));
    } else if (layout == "explicit") {
      cfg.geometry.d_hap_user = geo.at("d_hap_user").get<Grid2<double>>();
      cfg.geometry.d_user_ch = geo.at("d_user_ch").get<Grid3<double>>();
    } else if (layout == "disk") {
      const std::string rule = geo.value("ch_rule", std::string("centre"));
      require(rule == "centre" || rule == "hap", "geometry.ch_rule must be centre or hap");
      auto lay = sample_disk_layout(cfg.K, cfg.N, geo.value("seed", std::uint64_t{1}));
      lay = assign_cluster_heads(lay, rule == "hap" ? ChRule::NearestToHap : ChRule::NearestToCentre);
      cfg.geometry = geometry_from_positions(lay, cfg.geometry.d0, cfg.geometry.amplitude_scale);
    } else {
      throw InvalidArgument("unknown geometry.layout: " + layout);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

NetworkConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const NetworkConfig& cfg) {
  json j;
  j["K"] = cfg.K;
  j["N"] = cfg.N;
  j["M_h"] = cfg.M_h;
  j["M"] = cfg.M;
  j["Pc"] = cfg.Pc;
  j["eta"] = cfg.eta;
  j["p0"] = cfg.p0;
  j["T"] = cfg.T;
  j["tau1"] = cfg.tau1;
  j["noise_uch"] = cfg.noise_uch;
  j["noise_uhap"] = cfg.noise_uhap;
  j["noise_chhap"] = cfg.noise_chhap;
  j["rho_h"] = cfg.rho_h;
  j["rho_g"] = cfg.rho_g;
  j["alpha"] = cfg.alpha;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  j["eh"] = {{"a", cfg.eh.a},
             {"b", cfg.eh.b},
             {"c", cfg.eh.c},
             {"zeta", cfg.eh.zeta},
             {"p_floor", cfg.eh.p_floor},
             {"mode", cfg.eh.mode == EhMode::Linear ? "linear" : "nonlinear"}};
  j["geometry"] = {{"layout", "explicit"},
                   {"d0", cfg.geometry.d0},
                   {"amplitude_scale", cfg.geometry.amplitude_scale},
                   {"d_hap_user", cfg.geometry.d_hap_user},
                   {"d_user_ch", cfg.geometry.d_user_ch}};
  return j.dump(2);
}

}  // namespace wpcn
