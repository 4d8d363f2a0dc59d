// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <CLI11.hpp>

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gempic/driver.hpp"
#include "gempic/errors.hpp"
#include "oracles/cases.hpp"
#include "oracles/form_oracle.hpp"
#include "oracles/mass_oracle.hpp"

using namespace gempic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char b[64];
  std::snprintf(b, sizeof(b), f, x);
  return b;
}
std::string sci(double x) { return fmt("%.2e", x); }

Vector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Desk-scale runs shared by several criteria, computed on first use.
class Runs {
 public:
  explicit Runs(fs::path root, int workers) : root_(std::move(root)), workers_(workers) {}

  const RunResult& get(const std::string& key, const std::function<RunConfig()>& make) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    RunConfig c = make();
    c.output_dir = (root_ / key).string();
    c.workers = workers_;
    const auto t0 = std::chrono::steady_clock::now();
    RunResult r = run(c);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "  [run %s: %zu rows, %.1f s%s%s]\n", key.c_str(), r.rows.size(), sec,
                 r.error.empty() ? "" : ", error: ", r.error.c_str());
    return cache_.emplace(key, std::move(r)).first->second;
  }

  // The desk-scale Weibel kz/B2 run of the conservation criteria.
  const RunResult& weibel(Integrator m, ParticleBoundary mode = ParticleBoundary::Periodic) {
    const std::string key = "weibel_" + std::string(to_string(m)) + "_" +
                            std::string(to_string(mode));
    return get(key, [&] {
      RunConfig c = preset("weibel-cartesian-kz-B2");
      c.integrator = m;
      c.boundary = mode;
      c.schur_tol = 1e-13;
      return c;
    });
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  int workers_;
  std::map<std::string, RunResult> cache_;
};

// 1. de Rham exactness on random coefficient vectors.
Outcome exactness() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  double fixed = 0.0;
  int cases = 0;
  for (int p = 1; p <= 3; ++p) {
    for (int n : {4, 8}) {
      for (bool pec : {false, true}) {
        const DeRhamSequence s(p, {n, n, n}, pec);
        for (int t = 0; t < 25; ++t) {
          const Vector x = random_vector(s.dim(0), rng);
          const Vector y = random_vector(s.dim(1), rng);
          worst = std::max(worst, s.curl(s.grad(x)).lpNorm<Eigen::Infinity>());
          worst = std::max(worst, s.div(s.curl(y)).lpNorm<Eigen::Infinity>());
          cases += 2;
          // Same data rounded to a 2^-30 grid, where every difference is exact.
          const Vector xf = (x * 0x1.0p30).array().round() * 0x1.0p-30;
          const Vector yf = (y * 0x1.0p30).array().round() * 0x1.0p-30;
          fixed = std::max(fixed, s.curl(s.grad(xf)).lpNorm<Eigen::Infinity>());
          fixed = std::max(fixed, s.div(s.curl(yf)).lpNorm<Eigen::Infinity>());
        }
      }
    }
  }
  return {worst <= 1e-13, std::to_string(cases) + " products, max |CGx|,|DCy| = " + sci(worst) +
                             " (fixed-point data: " + sci(fixed) + ")"};
}

// 2. Physical derivatives of evaluated fields against evaluation of G, C, D.
Outcome commuting() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int points = 0;
  for (const auto& mc : cases::all_maps()) {
    const Mapping map = mc.map();
    const oracle::MapConsts consts = mc.consts();
    for (int p = 1; p <= 3; ++p) {
      const DeRhamSequence s(p, {5, 4, 6}, p != 2);
      const Vector phi = random_vector(s.dim(0), rng);
      const Vector a = random_vector(s.dim(1), rng);
      const Vector b = random_vector(s.dim(2), rng);
      const Vector gphi = s.grad(phi);
      const Vector ca = s.curl(a);
      const Vector db = s.div(b);
      for (int t = 0; t < 20; ++t) {
        const Vec3 xi(u(rng), u(rng), u(rng));
        const MetricData md = map.metric(xi);
        const Eigen::Matrix3d jac = oracle::map_jacobian_closed<double>(mc.ofam, consts, xi);
        Vec3 dphi;
        for (int d = 0; d < 3; ++d) dphi[d] = oracle::form_partial(s, 0, 0, phi, xi, d);
        const Vec3 grad_ref = jac.inverse().transpose() * dphi;
        const Eigen::Matrix3d ja = oracle::physical_gradient(s, 1, mc.ofam, consts, a, xi);
        const Vec3 curl_ref(ja(2, 1) - ja(1, 2), ja(0, 2) - ja(2, 0), ja(1, 0) - ja(0, 1));
        const double div_ref = oracle::physical_gradient(s, 2, mc.ofam, consts, b, xi).trace();

        const Vec3 grad = piola_covariant(md, s.eval_form(1, gphi, xi));
        const Vec3 curl = piola_contravariant(md, s.eval_form(2, ca, xi));
        const double div = s.eval_form(3, db, xi)[0] / md.jacobian.determinant();
        worst = std::max(worst, (grad - grad_ref).norm() / (1.0 + grad_ref.norm()));
        worst = std::max(worst, (curl - curl_ref).norm() / (1.0 + curl_ref.norm()));
        worst = std::max(worst, std::abs(div - div_ref) / (1.0 + std::abs(div_ref)));
        points += 3;
      }
    }
  }
  return {worst <= 1e-12,
          std::to_string(points) + " point checks on 4 maps, max rel defect " + sci(worst)};
}

// 3. Assembled mass matrices against dense brute-force quadrature.
Outcome mass_oracle() {
  double worst = 0.0;
  bool spd = true;
  int count = 0;
  const std::pair<int, Index3> grids[] = {{3, {4, 4, 4}}, {2, {5, 5, 5}}, {1, {6, 6, 6}},
                                          {3, {6, 5, 4}}};
  for (const auto& mc : cases::all_maps()) {
    const Mapping map = mc.map();
    for (const auto& [p, cells] : grids) {
      const DeRhamSequence s(p, cells, p != 2);
      for (int k = 0; k < 4; ++k) {
        const MassOperator m = assemble_mass(s, map, k);
        const Eigen::MatrixXd ref = oracle::dense_mass(s, mc.ofam, mc.consts(), k, m.quad_points);
        const Eigen::MatrixXd got = m.matrix.dense();
        worst = std::max(worst, (got - ref).cwiseAbs().maxCoeff() /
                                    std::max(1.0, ref.cwiseAbs().maxCoeff()));
        spd = spd && (got - got.transpose()).cwiseAbs().maxCoeff() == 0.0 &&
              Eigen::LLT<Eigen::MatrixXd>(got).info() == Eigen::Success;
        ++count;
      }
    }
  }
  return {worst <= 1e-10 && spd, std::to_string(count) + " matrices, max rel diff " + sci(worst) +
                                     (spd ? ", all SPD" : ", NOT all SPD")};
}

// 4. Boundary matrices on PEC spaces and the Poynting column of a 100-step run.
Outcome pec_boundary(Runs& runs) {
  double bmax = 0.0;
  for (const auto& mc : cases::all_maps()) {
    for (int p = 1; p <= 3; ++p) {
      const DeRhamSequence s(p, {6, 5, 4}, true);
      const BoundaryMatrices bm = assemble_boundary_matrices(s, mc.map());
      bmax = std::max({bmax, bm.zero_form.max_abs(), bm.one_form.max_abs()});
    }
  }
  const RunResult& r = runs.weibel(Integrator::HS);
  double pmax = 0.0;
  std::size_t rows = 0;
  for (const auto& row : r.rows) {
    if (row.step > 100) break;
    pmax = std::max(pmax, std::abs(row.poynting));
    ++rows;
  }
  const bool ok = bmax == 0.0 && pmax == 0.0 && rows == 101 && r.error.empty();
  return {ok, "max |Mb0|,|Mb1| = " + sci(bmax) + "; Poynting max over " + std::to_string(rows) +
                  " rows = " + sci(pmax)};
}

// 5. Preconditioned mass solves.
Outcome preconditioner() {
  std::mt19937_64 rng(505);
  struct Case {
    const char* name;
    int family_index;
    int p;
    int limit;
    bool ratio;
  };
  const Case list[] = {{"cartesian p=2", 0, 2, 16, false},
                       {"cartesian p=3", 0, 3, 22, false},
                       {"cylindrical p=3", 2, 3, 28, true},
                       {"elliptical p=3", 3, 3, 1 << 30, true}};
  const auto maps = cases::all_maps();
  bool ok = true;
  std::string detail;
  for (const Case& c : list) {
    const DeRhamSequence s(c.p, {8, 8, 8}, true);
    const Mapping map = maps[c.family_index].map();
    int pcg_it = 0;
    int cg_it = 0;
    bool conv = true;
    for (int k : {1, 2}) {
      const MassOperator m = assemble_mass(s, map, k);
      const MassSolver solver(m, s, PreconditionerMode::Lumped, 1e-13, 2000);
      for (int t = 0; t < 3; ++t) {
        const Vector b = random_vector(m.size(), rng);
        Vector x = Vector::Zero(b.size());
        const SolveReport r = solver.solve(b, x);
        conv = conv && r.converged;
        pcg_it = std::max(pcg_it, r.iterations);
        if (c.ratio && t == 0) {
          Vector y = Vector::Zero(b.size());
          const SolveReport rc = cg(as_operator(m), b, y, 1e-13, 200000);
          conv = conv && rc.converged;
          cg_it = std::max(cg_it, rc.iterations);
        }
      }
    }
    const bool pass = conv && pcg_it <= c.limit && (!c.ratio || cg_it >= 20 * pcg_it);
    ok = ok && pass;
    if (!detail.empty()) detail += "; ";
    detail += std::string(c.name) + ": PCG " + std::to_string(pcg_it);
    if (c.limit < (1 << 30)) detail += " (<= " + std::to_string(c.limit) + ")";
    if (c.ratio) {
      detail += ", CG " + std::to_string(cg_it) + ", ratio " +
                fmt("%.1f", static_cast<double>(cg_it) / pcg_it);
    }
  }
  return {ok, detail};
}

double max_drift(const RunResult& r, double DiagnosticsRow::*field) {
  double m = 0.0;
  for (const auto& row : r.rows) m = std::max(m, std::abs(row.*field - r.rows[0].*field));
  return m;
}

double max_rel_energy(const RunResult& r) {
  return max_drift(r, &DiagnosticsRow::total) / std::abs(r.rows[0].total);
}

bool complete(const RunResult& r, std::size_t rows) { return r.error.empty() && r.rows.size() == rows; }

// 6. Gauss law over 500 steps for the charge-conserving schemes.
Outcome charge(Runs& runs) {
  bool ok = true;
  std::string detail;
  for (Integrator m : {Integrator::HS, Integrator::CEF}) {
    const RunResult& r = runs.weibel(m);
    const double g = max_drift(r, &DiagnosticsRow::gauss);
    ok = ok && complete(r, 501) && g <= 1e-10;
    if (!detail.empty()) detail += "; ";
    detail += std::string(to_string(m)) + " max Gauss growth " + sci(g) + " (initial " +
              sci(r.rows[0].gauss) + ")";
    if (!r.error.empty()) detail += " error: " + r.error;
  }
  return {ok, detail};
}

// Relative energy error series is bounded and changes direction repeatedly.
bool no_monotone_drift(const RunResult& r) {
  int up = 0;
  int down = 0;
  for (std::size_t k = 1; k < r.rows.size(); ++k) {
    const double d = r.rows[k].total - r.rows[k - 1].total;
    up += d > 0;
    down += d < 0;
  }
  const int n = static_cast<int>(r.rows.size()) - 1;
  return up >= n / 10 && down >= n / 10;
}

// 7. Energy conservation of the discrete gradient scheme, bounded error otherwise.
Outcome energy(Runs& runs) {
  const RunResult& d = runs.weibel(Integrator::DisGradE);
  const double ed = max_rel_energy(d);
  bool ok = complete(d, 501) && ed <= 1e-9;
  std::string detail = "disgrade max rel energy error " + sci(ed);
  if (!d.error.empty()) detail += " error: " + d.error;
  for (Integrator m : {Integrator::HS, Integrator::CEF}) {
    const RunResult& r = runs.weibel(m);
    const double e = max_rel_energy(r);
    const bool bounded = no_monotone_drift(r);
    ok = ok && complete(r, 501) && e <= 1e-2 && bounded;
    detail += "; " + std::string(to_string(m)) + " " + sci(e) +
              (bounded ? " (no monotone drift)" : " (monotone drift)");
  }
  return {ok, detail};
}

// 8. Discrete divergence of b through every run, all integrators and grids.
Outcome div_b(Runs& runs) {
  double worst = 0.0;
  int count = 0;
  bool ok = true;
  auto scan = [&](const RunResult& r, const std::string& key) {
    ok = ok && r.error.empty();
    if (!r.error.empty()) std::fprintf(stderr, "  [%s failed: %s]\n", key.c_str(), r.error.c_str());
    for (const auto& row : r.rows) {
      worst = std::max(worst, row.div_b);
      ++count;
    }
  };
  for (Integrator m : {Integrator::HS, Integrator::CEF, Integrator::DisGradE}) {
    scan(runs.weibel(m), "weibel");
  }
  const char* families[] = {"cartesian", "distorted", "cylindrical", "elliptical"};
  for (const char* fam : families) {
    for (Integrator m : {Integrator::HS, Integrator::CEF, Integrator::DisGradE}) {
      const std::string key = std::string("divb_") + fam + "_" + std::string(to_string(m));
      const RunResult& r = runs.get(key, [&] {
        RunConfig c = preset("weibel-cartesian-kz-B2-reflect");
        c.family = map_family_from_string(fam);
        if (c.family == MapFamily::Distorted) c.map_params.epsilon = 0.05;
        if (c.family == MapFamily::Cylindrical || c.family == MapFamily::Elliptical) {
          c.cells = {16, 16, 8};
          c.dt = m == Integrator::DisGradE ? 0.1 : 0.01;
        }
        c.integrator = m;
        c.particles = 8000;
        c.t_end = 20 * c.dt;
        return c;
      });
      scan(r, key);
    }
  }
  return {ok && worst <= 1e-13,
          std::to_string(count) + " rows over 15 runs, max ||D b||_inf = " + sci(worst)};
}

// 9. Weibel phenomenology.
Outcome weibel(Runs& runs) {
  const RunResult& per = runs.weibel(Integrator::HS, ParticleBoundary::Periodic);
  const RunResult& ref = runs.weibel(Integrator::HS, ParticleBoundary::Reflect);
  if (!complete(per, 501) || !complete(ref, 501)) {
    return {false, "runs did not complete: " + per.error + " " + ref.error};
  }
  // growth: largest magnetic energy over the preceding minimum
  double lo = per.rows[0].magnetic;
  double decades = 0.0;
  for (const auto& row : per.rows) {
    lo = std::min(lo, row.magnetic);
    decades = std::max(decades, std::log10(row.magnetic / lo));
  }
  const bool growth = decades >= 4.0;
  const auto& pe = per.rows.back();
  const auto& re = ref.rows.back();
  const double b2_per = pe.magnetic_component[1];
  const double b2_ref = re.magnetic_component[1];
  const double b13_ref0 = ref.rows[0].magnetic_component[0] + ref.rows[0].magnetic_component[2];
  const double b13_ref = re.magnetic_component[0] + re.magnetic_component[2];
  const bool suppressed = b2_ref < b2_per;
  const bool delayed = b13_ref > 10.0 * std::max(b13_ref0, 1e-300);

  // distorted map with epsilon 0 against the Cartesian map: identical bytes
  auto small = [](MapFamily f) {
    RunConfig c = preset("weibel-cartesian-kz-B2");
    c.family = f;
    c.map_params.epsilon = 0.0;
    c.particles = 4000;
    c.t_end = 2.0;
    return c;
  };
  runs.get("eps0_cartesian", [&] { return small(MapFamily::Cartesian); });
  runs.get("eps0_distorted", [&] { return small(MapFamily::Distorted); });
  auto slurp = [&](const char* key) {
    std::ifstream in(runs.root() / key / "diagnostics.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = slurp("eps0_cartesian");
  const bool identical = !a.empty() && a == slurp("eps0_distorted");

  std::string detail = "periodic growth " + fmt("%.2f", decades) + " decades (" +
                       sci(per.rows[0].magnetic) + " -> max); B2 at T: reflect " + sci(b2_ref) +
                       " vs periodic " + sci(b2_per) + "; reflect B1+B3 " + sci(b13_ref0) +
                       " -> " + sci(b13_ref) + "; eps=0 distorted " +
                       (identical ? "bitwise identical" : "DIFFERS");
  return {growth && suppressed && delayed && identical, detail};
}

// 10. Reflections preserve speed and particle count.
Outcome reflection() {
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t total = 1000000;
  const std::size_t batch = 100000;
  double worst = 0.0;
  std::size_t kept = 0;
  std::size_t reflected = 0;
  const auto maps = cases::all_maps();
  for (std::size_t done = 0; done < total; done += batch) {
    const auto& mc = maps[(done / batch) % maps.size()];
    const Mapping map = mc.map();
    std::vector<Vec3> start(batch);
    std::vector<Vec3> xi(batch);
    std::vector<Vec3> v(batch);
    std::vector<double> speed(batch);
    for (std::size_t p = 0; p < batch; ++p) {
      const bool left = u(rng) < 0.5;
      start[p] = Vec3(left ? 0.05 * u(rng) : 1.0 - 0.05 * u(rng), u(rng), u(rng));
      xi[p] = start[p] + Vec3(left ? -0.1 * u(rng) - 0.05 : 0.1 * u(rng) + 0.05,
                              0.2 * (u(rng) - 0.5), 0.2 * (u(rng) - 0.5));
      v[p] = Vec3(n(rng), n(rng), n(rng));
      speed[p] = v[p].norm();
    }
    const auto rec = apply_boundary(xi, v, start, map, ParticleBoundary::Reflect);
    reflected += rec.size();
    for (std::size_t p = 0; p < batch; ++p) {
      worst = std::max(worst, std::abs(v[p].norm() - speed[p]) / speed[p]);
      kept += xi[p].allFinite() && xi[p][0] >= 0.0 && xi[p][0] <= 1.0;
    }
  }
  const bool ok = worst <= 1e-15 && kept == total && reflected == total;
  return {ok, std::to_string(reflected) + " reflections on 4 maps, max rel speed change " +
                  sci(worst) + ", " + std::to_string(kept) + "/" + std::to_string(total) +
                  " particles kept"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::set<int> only;
  std::string out = (fs::temp_directory_path() / "gempic_acceptance").string();
  int workers = 1;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--out", out, "Directory for run outputs");
  app.add_option("--workers", workers, "Particle worker threads");
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(out);
  fs::create_directories(out);
  Runs runs(out, workers);
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Entry> list = {
      {1, "de Rham exactness", exactness},
      {2, "commuting evaluation", commuting},
      {3, "mass-matrix oracle", mass_oracle},
      {4, "PEC boundary matrices and Poynting term", [&] { return pec_boundary(runs); }},
      {5, "preconditioner effectiveness", preconditioner},
      {6, "charge conservation", [&] { return charge(runs); }},
      {7, "energy conservation", [&] { return energy(runs); }},
      {8, "div B", [&] { return div_b(runs); }},
      {9, "Weibel phenomenology", [&] { return weibel(runs); }},
      {10, "particle-boundary isometry", reflection},
  };
  int failed = 0;
  for (const Entry& e : list) {
    if (!only.empty() && !only.count(e.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.check();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %-42s %s  %s [%.1f s]\n", e.id, e.name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), sec);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d criterion(s) failed\n", failed);
  return failed == 0 ? 0 : 1;
}
