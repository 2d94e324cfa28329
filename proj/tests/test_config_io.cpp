#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "microfrac/config.hpp"
#include "microfrac/io.hpp"
#include "vtk_reader.hpp"

using namespace microfrac;

namespace {

std::filesystem::path write_temp_config(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path;
}

const char* kMinimalConfig = R"(# minimal homogenize setup
[materials]
E_m = 60000
nu_m = 0.3
E_i = 340000
nu_i = 0.18

[cell]
shape = circle
f = 1/4
n = 64
)";

const char* kBenchmarkConfig = R"([materials]
E_m = 60000   # MPa
nu_m = 0.3
E_i = 340000
nu_i = 0.18
K = 0.005
g_variant = literal

[cell]
shape = circle
f = 1/4
n = 64

[macro]
nx = 20
ny = 40
L = 1.0
notch = false

[solver]
G_C = 6.0
ell = 0.4
delta_max = 0.03
n_steps = 60

[output]
dir = out
table = table.csv
)";

} // namespace

TEST(ParseConfig, MinimalConfigAppliesDefaults) {
  const auto path = write_temp_config("mf_minimal.cfg", kMinimalConfig);
  const RunConfig cfg = parse_config(path);
  EXPECT_EQ(cfg.n_samples, 101);
  EXPECT_DOUBLE_EQ(cfg.phases.K, 0.005);
  EXPECT_EQ(cfg.phases.g_variant, GVariant::literal);
  EXPECT_DOUBLE_EQ(cfg.inclusion.f, 0.25); // rational literal 1/4
  EXPECT_EQ(cfg.cell_n, 64);
  EXPECT_EQ(cfg.irreversibility, SolverConfig::Irreversibility::clamp);
  EXPECT_EQ(cfg.coupling, SolverConfig::Coupling::monolithic);
  EXPECT_DOUBLE_EQ(cfg.epsilon, 0.05);
  std::filesystem::remove(path);
}

TEST(ParseConfig, BenchmarkSetupParses) {
  const auto path = write_temp_config("mf_benchmark.cfg", kBenchmarkConfig);
  const RunConfig cfg = parse_config(path);
  EXPECT_DOUBLE_EQ(cfg.phases.E_m, 60000.0);
  EXPECT_DOUBLE_EQ(cfg.phases.nu_m, 0.3);
  EXPECT_DOUBLE_EQ(cfg.phases.E_i, 340000.0);
  EXPECT_DOUBLE_EQ(cfg.phases.nu_i, 0.18);
  EXPECT_DOUBLE_EQ(cfg.G_C, 6.0);
  EXPECT_DOUBLE_EQ(cfg.ell, 0.4);
  EXPECT_DOUBLE_EQ(cfg.L, 1.0);
  EXPECT_FALSE(cfg.notched);
  EXPECT_EQ(cfg.n_steps, 60);
  const SolverConfig s = cfg.solver_config();
  EXPECT_EQ(s.load_schedule.size(), 60u);
  EXPECT_DOUBLE_EQ(s.load_schedule.back(), 0.03);
  std::filesystem::remove(path);
}

TEST(ParseConfig, VolumeFractionOutOfRange) {
  const auto path = write_temp_config("mf_badf.cfg", R"([materials]
E_m = 60000
nu_m = 0.3
E_i = 340000
nu_i = 0.18
[cell]
shape = circle
f = 1.5
n = 64
)");
  try {
    parse_config(path);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("volume fraction out of range"), std::string::npos)
        << e.what();
  }
  std::filesystem::remove(path);
}

TEST(ParseConfig, UnknownKeyReportsLineNumber) {
  const auto path = write_temp_config("mf_badkey.cfg", R"([materials]
E_m = 60000
nu_m = 0.3
E_ii = 1
)");
  try {
    parse_config(path);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":4:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("E_ii"), std::string::npos) << msg;
  }
  std::filesystem::remove(path);
}

TEST(ParseConfig, TypeErrorsAndDuplicates) {
  const auto bad_type = write_temp_config("mf_badtype.cfg", R"([cell]
n = sixty-four
)");
  EXPECT_THROW(parse_config(bad_type), ConfigError);
  std::filesystem::remove(bad_type);

  const auto dup = write_temp_config("mf_dup.cfg", R"([materials]
E_m = 60000
E_m = 70000
)");
  try {
    parse_config(dup);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
  std::filesystem::remove(dup);

  const auto missing = write_temp_config("mf_missing.cfg", "[materials]\nE_m = 60000\n");
  EXPECT_THROW(parse_config(missing), ConfigError);
  std::filesystem::remove(missing);
}

TEST(ParseConfig, SweepListsAndScenarioValidation) {
  const auto path = write_temp_config("mf_sweep.cfg", R"([materials]
E_m = 60000
nu_m = 0.3
E_i = 340000
nu_i = 0.18
[cell]
shape = circle
f = 1/4
n = 32
f_list = 1/100, 1/4
[solver]
G_C = 6.0
ell = 0.4
ell_list = 0.1, 0.4
delta_max = 0.03
n_steps = 30
[macro]
notch_list = false, true
)");
  const RunConfig cfg = parse_config(path);
  ASSERT_EQ(cfg.f_list.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.f_list[0], 0.01);
  ASSERT_EQ(cfg.ell_list.size(), 2u);
  ASSERT_EQ(cfg.notch_list.size(), 2u);
  EXPECT_NO_THROW(cfg.validate_for(Scenario::sweep));
  // solve requires an existing table file
  EXPECT_THROW(cfg.validate_for(Scenario::solve), ConfigError);
  // downscale additionally requires the query point
  EXPECT_THROW(cfg.validate_for(Scenario::downscale), ConfigError);
  std::filesystem::remove(path);
}

TEST(WriteCurve, EmptyAndOrderedRows) {
  const auto path = std::filesystem::temp_directory_path() / "mf_curve.csv";
  write_curve({}, path);
  {
    std::ifstream in(path);
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, "step,delta_mm,H22_avg,T22_avg_MPa,max_d,newton_iters");
    EXPECT_FALSE(std::getline(in, line));
  }

  std::vector<StepRecord> records;
  for (int k = 1; k <= 5; ++k) {
    StepRecord r;
    r.step = k;
    r.delta = 5e-4 * k;
    r.h22 = r.delta;
    r.t22 = 100.0 * k;
    r.max_d = 0.01 * k;
    r.newton_iters = 3;
    r.converged = true;
    records.push_back(r);
  }
  StepRecord failed;
  failed.converged = false;
  records.push_back(failed); // flagged rows are not emitted
  write_curve(records, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  double prev = -1.0;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto first_comma = line.find(',');
    const auto second_comma = line.find(',', first_comma + 1);
    const double delta = std::stod(line.substr(first_comma + 1, second_comma - first_comma - 1));
    EXPECT_GT(delta, prev);
    prev = delta;
  }
  EXPECT_EQ(rows, 5);
  std::filesystem::remove(path);
}

TEST(WriteField, OneElementZeroDamage) {
  Quad4Mesh mesh;
  mesh.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  mesh.elements = {{0, 1, 2, 3}};
  mesh.material = {MaterialId::matrix};
  mesh.nx = mesh.ny = 1;
  mesh.dx1 = mesh.dx2 = 1.0;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
  u[2] = 0.25; // u1 at node 1
  Eigen::VectorXd d = Eigen::VectorXd::Zero(4);

  const auto path = std::filesystem::temp_directory_path() / "mf_field.vtk";
  write_field(mesh, u, d, path);
  const auto data = vtk_reader::read(path.string());
  ASSERT_EQ(data.points.size(), 4u);
  ASSERT_EQ(data.cells.size(), 1u);
  EXPECT_EQ(data.cell_types[0], 9); // VTK_QUAD
  ASSERT_TRUE(data.scalars.count("d"));
  for (double v : data.scalars.at("d")) EXPECT_DOUBLE_EQ(v, 0.0);
  ASSERT_TRUE(data.vectors.count("U"));
  EXPECT_DOUBLE_EQ(data.vectors.at("U")[1][0], 0.25);
  EXPECT_DOUBLE_EQ(data.vectors.at("U")[1][2], 0.0); // padded third component
  for (size_t a = 0; a < 4; ++a) {
    EXPECT_DOUBLE_EQ(data.points[a][0], mesh.nodes[a].x1);
    EXPECT_DOUBLE_EQ(data.points[a][1], mesh.nodes[a].x2);
  }
  std::filesystem::remove(path);
}

TEST(WriteCurve, RepeatedWritesAreByteIdentical) {
  std::vector<StepRecord> records;
  StepRecord r;
  r.step = 1;
  r.delta = 1.0 / 3.0;
  r.h22 = r.delta;
  r.t22 = 12345.6789012345678;
  r.max_d = 0.1234567890123456789;
  r.newton_iters = 4;
  r.converged = true;
  records.push_back(r);

  const auto p1 = std::filesystem::temp_directory_path() / "mf_det1.csv";
  const auto p2 = std::filesystem::temp_directory_path() / "mf_det2.csv";
  write_curve(records, p1);
  write_curve(records, p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  EXPECT_EQ(s1, s2);
  EXPECT_FALSE(s1.empty());

  // Full round trip through text preserves the doubles exactly.
  const auto comma = s1.rfind("newton_iters\n");
  std::stringstream row(s1.substr(comma + 13));
  std::string cell;
  std::getline(row, cell, ','); // step
  std::getline(row, cell, ',');
  EXPECT_EQ(std::stod(cell), 1.0 / 3.0);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}
