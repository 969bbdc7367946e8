#include "doctest.h"
#include "support.hpp"

#include "nodalflow/io.hpp"
#include "nodalflow/model.hpp"

#include <filesystem>
#include <fstream>
#include <string>

using namespace nodalflow;
using nftest::kTwoPi;

namespace {

std::vector<std::uint8_t> read_hex(const std::string& name) {
  std::ifstream in(std::string(NODALFLOW_GOLDEN_DIR) + "/" + name);
  REQUIRE(in);
  std::string text;
  in >> text;
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < text.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(text.substr(i, 2), nullptr, 16)));
  }
  return out;
}

TrajectoryDataset random_dataset(Rng& rng, Index n, Index comps, Index steps, std::size_t m, bool permuted) {
  TrajectoryDataset ds;
  ds.grid = make_uniform_periodic_grid(n, kTwoPi);
  if (permuted) ds.grid = perturb_and_permute_grid(ds.grid, 0.25, rng.next_u64());
  ds.steps = steps;
  ds.dt = rng.uniform(1e-3, 0.1);
  ds.layout = {n, comps};
  for (std::size_t j = 0; j < m; ++j) {
    TrajectorySequence seq;
    seq.dt = ds.dt;
    for (Index k = 0; k <= steps; ++k) {
      seq.states.emplace_back(nftest::random_vector(rng, n * comps, 3.0), static_cast<double>(k) * ds.dt,
                              StateLayout{n, comps});
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

void check_same(const TrajectoryDataset& a, const TrajectoryDataset& b) {
  CHECK(a.grid == b.grid);
  CHECK(a.steps == b.steps);
  CHECK(a.dt == b.dt);
  CHECK(a.layout == b.layout);
  REQUIRE(a.sequences.size() == b.sequences.size());
  for (std::size_t j = 0; j < a.sequences.size(); ++j) {
    REQUIRE(a.sequences[j].states.size() == b.sequences[j].states.size());
    for (std::size_t k = 0; k < a.sequences[j].states.size(); ++k) {
      CHECK(nftest::bit_equal(a.sequences[j].states[k].values, b.sequences[j].states[k].values));
      CHECK(a.sequences[j].states[k].time == b.sequences[j].states[k].time);
    }
  }
}

TrajectoryDataset minimal_dataset() {
  TrajectoryDataset ds;
  ds.grid = make_uniform_periodic_grid(2, kTwoPi);
  ds.steps = 1;
  ds.dt = 0.5;
  ds.layout = {2, 1};
  TrajectorySequence seq;
  seq.dt = 0.5;
  seq.states.push_back(NodalState::scalar(Vector::LinSpaced(2, 1.0, 2.0), 0.0));
  seq.states.push_back(NodalState::scalar(Vector::LinSpaced(2, 3.0, 4.0), 0.5));
  ds.sequences.push_back(seq);
  return ds;
}

FormatErrorKind decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_dataset(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode accepted a corrupt payload");
  return FormatErrorKind::Io;
}

}  // namespace

TEST_CASE("minimal NTDF matches the golden bytes") {
  const auto golden = read_hex("ntdf_minimal.hex");
  const auto bytes = encode_dataset(minimal_dataset());
  CHECK(bytes.size() == 104);  // 40 header + 2 coords + 2 perm + 2 states of 2 values
  CHECK(bytes == golden);
  check_same(decode_dataset(golden), minimal_dataset());
  const NtdfHeader h = read_ntdf_header(golden);
  CHECK(h.version == 1);
  CHECK(h.dim == 1);
  CHECK(h.nodes == 2);
  CHECK(h.components == 1);
  CHECK(h.steps == 1);
  CHECK(h.dt == 0.5);
  CHECK(h.sequences == 1);
}

TEST_CASE("property: NTDF round trip is bit exact") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const auto n = static_cast<Index>(2 + rng.below(30));
    const auto comps = static_cast<Index>(1 + rng.below(2));
    const auto steps = static_cast<Index>(1 + rng.below(5));
    const TrajectoryDataset ds = random_dataset(rng, n, comps, steps, 1 + rng.below(6), rng.below(2) == 1);
    check_same(decode_dataset(encode_dataset(ds)), ds);
  }
}

TEST_CASE("NTDF file round trip through disk") {
  Rng rng(8);
  const TrajectoryDataset ds = random_dataset(rng, 16, 2, 3, 4, true);
  const auto path = std::filesystem::temp_directory_path() / "nodalflow_test_io.ntdf";
  write_dataset(ds, path);
  check_same(read_dataset(path), ds);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_dataset(path), FormatError);
}

TEST_CASE("corrupt NTDF payloads raise distinct format errors") {
  const auto good = encode_dataset(minimal_dataset());

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(decode_error(bad_magic) == FormatErrorKind::BadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(decode_error(bad_version) == FormatErrorKind::VersionMismatch);

  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, good.size() - 1}) {
    const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK(decode_error(truncated) == FormatErrorKind::Truncated);
  }

  auto bad_perm = good;
  bad_perm[56] = 1;  // permutation {1, 1}
  CHECK(decode_error(bad_perm) == FormatErrorKind::ShapeMismatch);
}

TEST_CASE("NPMC header and parameters match the golden bytes") {
  NetworkParams p = NetworkParams::zeros(NetworkDims::standard(2, 2, 1, 1, 1));
  p.assembly.back().bias[0] = 0.25;
  const auto bytes = encode_checkpoint(Checkpoint{p, {}, std::nullopt});
  const auto golden = read_hex("npmc_2x2_header.hex");
  REQUIRE(bytes.size() > golden.size());
  CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(golden.size())) == golden);
  const NpmcHeader h = read_npmc_header(bytes);
  CHECK(h.version == 1);
  CHECK(h.dims == p.dims);
  CHECK(h.parameters == 8);
}

TEST_CASE("NPMC round trip is bit exact with history and optimizer state") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto n = static_cast<Index>(2 + rng.below(10));
    const bool lifted = rng.below(2) == 1;
    const Index width = lifted ? static_cast<Index>(1 + rng.below(8)) : n;
    NetworkDims dims = NetworkDims::standard(n, width, static_cast<Index>(1 + rng.below(3)),
                                             static_cast<Index>(1 + rng.below(4)), static_cast<Index>(1 + rng.below(3)));
    if (lifted) dims.lift = LiftKind::Affine;
    Checkpoint c{init_params(dims, rng.next_u64()), {}, std::nullopt};
    for (int e = 0; e < 3; ++e) {
      c.history.loss.push_back(rng.uniform());
      c.history.lr.push_back(rng.uniform() * 1e-3);
    }
    c.history.config = "{\"n_L\":3}";
    if (trial % 2 == 0) {
      AdamState a = AdamState::zeros(c.params.parameter_count());
      a.m = nftest::random_vector(rng, a.m.size());
      a.v = nftest::random_vector(rng, a.v.size()).cwiseAbs();
      a.step = rng.below(100000);
      c.adam = a;
    }
    const Checkpoint back = decode_checkpoint(encode_checkpoint(c));
    CHECK(back.params == c.params);
    CHECK(nftest::bit_equal(back.params.flatten(), c.params.flatten()));
    CHECK(back.params.init_seed == c.params.init_seed);
    CHECK(back.history.loss == c.history.loss);
    CHECK(back.history.lr == c.history.lr);
    CHECK(back.history.config == c.history.config);
    CHECK(back.adam.has_value() == c.adam.has_value());
    if (c.adam) CHECK(*back.adam == *c.adam);
    CHECK(encode_checkpoint(back) == encode_checkpoint(c));
  }
}

TEST_CASE("loading a checkpoint into mismatched dims is rejected") {
  const Checkpoint c{init_params(NetworkDims::standard(8, 8, 1, 2, 1), 1), {}, std::nullopt};
  const auto path = std::filesystem::temp_directory_path() / "nodalflow_test_io.npmc";
  save_checkpoint(c, path);
  CHECK(load_checkpoint(path, c.params.dims).params == c.params);
  try {
    load_checkpoint(path, NetworkDims::standard(8, 8, 1, 3, 1));
    FAIL("mismatched dims accepted");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatErrorKind::ShapeMismatch);
  }
  std::filesystem::remove(path);

  auto bytes = encode_checkpoint(c);
  bytes[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
  bytes = encode_checkpoint(c);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
}
