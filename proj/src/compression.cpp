#include "probelab/compression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

namespace probelab {

namespace mp = boost::multiprecision;

namespace {

using Float = mp::cpp_bin_float_100;

mp::cpp_int binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  mp::cpp_int r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

std::vector<std::size_t> pad(const std::vector<std::size_t>& cells, std::size_t t_u) {
  std::vector<std::size_t> out = cells;
  std::size_t next = 0;
  std::size_t k = 0;  // cursor into the sorted input
  while (out.size() < t_u) {
    while (k < cells.size() && cells[k] < next) ++k;
    if (k < cells.size() && cells[k] == next) {
      ++next;
      continue;
    }
    out.push_back(next++);
  }
  std::sort(out.begin(), out.end());
  return out;
}

FamilySize family_from_log2(const Float& log2_inv_p, Index n, unsigned a) {
  if (a == 0) throw std::invalid_argument("family size needs a >= 1");
  if (n < a) throw std::invalid_argument("family size needs a <= n");
  const Float e = mp::exp(Float(1));
  const Float spread = Float(a) * mp::log2(e * Float(n) / Float(a));
  const Float log2_x = log2_inv_p + mp::log2(spread);
  const Float x = mp::pow(Float(2), log2_x);
  const mp::cpp_int k = static_cast<mp::cpp_int>(mp::ceil(x));

  FamilySize out;
  out.p = static_cast<double>(mp::pow(Float(2), -log2_inv_p));
  out.log2_k = static_cast<double>(log2_x);
  out.k_decimal = k.str();
  if (k <= std::numeric_limits<std::uint64_t>::max()) out.k = static_cast<std::uint64_t>(k);
  if (k > 1) {
    const auto top = static_cast<unsigned>(mp::msb(k));
    out.index_bits = (k == mp::cpp_int(1) << top) ? top : top + 1;
  }
  return out;
}

/// Forward Fisher-Yates; after step s, perm[s] is final.
class Shuffle {
 public:
  Shuffle(Index n, std::uint64_t seed) : perm_(n), rng_(SketchSeed(seed)) { std::iota(perm_.begin(), perm_.end(), 0); }

  void step(Index s) {
    const Index n = perm_.size();
    if (s + 1 < n) std::swap(perm_[s], perm_[s + rng_.below(n - s)]);
  }
  Index at(Index s) const { return perm_[s]; }
  std::vector<Index> take() { return std::move(perm_); }

 private:
  std::vector<Index> perm_;
  Rng rng_;
};

bool covers(const PermutationFamily& family, std::uint64_t i, const std::vector<Index>& sorted_input,
            const std::vector<bool>& covered) {
  if (family.identity_first() && i == 0) {
    return std::all_of(sorted_input.begin(), sorted_input.end(), [&](Index x) { return covered[x]; });
  }
  Shuffle sh(family.n(), family.seed_of(i));
  Index s = 0;
  for (Index x : sorted_input) {
    for (; s <= x; ++s) sh.step(s);
    if (!covered[sh.at(x)]) return false;
  }
  return true;
}

class BitWriter {
 public:
  void put(std::uint64_t value, unsigned bits) {
    for (unsigned b = bits; b-- > 0;) {
      const bool bit = b < 64 && ((value >> b) & 1);
      if (count_ % 8 == 0) bytes_.push_back(0);
      if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (count_ % 8));
      ++count_;
    }
  }
  std::uint64_t count() const { return count_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t count_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint64_t get(unsigned bits) {
    std::uint64_t v = 0;
    for (unsigned b = bits; b-- > 0;) {
      if (pos_ >= bytes_.size() * 8) throw MalformedMessage("compressed message truncated");
      const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1;
      ++pos_;
      if (b >= 64) {
        if (bit) throw MalformedMessage("permutation index exceeds 64 bits");
        continue;
      }
      v |= std::uint64_t{bit} << b;
    }
    return v;
  }
  std::uint64_t position() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::uint64_t pos_ = 0;
};

}  // namespace

bool CellSample::certificate_holds() const { return mp::cpp_int(covered.size()) * binomial(S, t_u) >= n; }

std::vector<bool> CellSample::covered_mask() const {
  std::vector<bool> mask(n, false);
  for (Index i : covered) mask[i] = true;
  return mask;
}

CellSample cell_sample(const std::vector<UpdateFootprint>& footprints, std::size_t t_u, std::size_t S) {
  if (t_u == 0 || t_u > S) throw std::invalid_argument("cell sample needs 1 <= t_u <= S");
  CellSample out;
  out.n = footprints.size();
  out.S = S;
  out.t_u = t_u;
  for (const UpdateFootprint& fp : footprints) {
    if (fp.cells.size() > t_u) {
      throw ContractViolation("index " + std::to_string(fp.index) + " probes " + std::to_string(fp.cells.size()) +
                              " cells, more than t_u = " + std::to_string(t_u));
    }
    if (!fp.cells.empty() && fp.cells.back() >= S) throw ContractViolation("footprint cell outside [0, S)");
    ++out.class_census[pad(fp.cells, t_u)];
  }
  Index best = 0;
  for (const auto& [cells, count] : out.class_census) {
    if (count > best) {
      best = count;
      out.cells = cells;
    }
  }
  if (out.cells.empty()) out.cells = pad({}, t_u);
  for (Index i = 0; i < footprints.size(); ++i) {
    const auto& c = footprints[i].cells;
    if (std::includes(out.cells.begin(), out.cells.end(), c.begin(), c.end())) out.covered.push_back(i);
  }
  return out;
}

CellSample cell_sample(const Sketch& sketch) {
  std::vector<UpdateFootprint> fps;
  fps.reserve(sketch.dimension());
  std::size_t t_u = 1;
  for (Index i = 0; i < sketch.dimension(); ++i) {
    fps.push_back(sketch.footprint(i));
    t_u = std::max(t_u, fps.back().cells.size());
  }
  return cell_sample(fps, t_u, sketch.region().size());
}

Coverage coverage_probability(Index n, Index m, Index a) {
  if (m > n) throw std::invalid_argument("coverage needs m <= n");
  Coverage out;
  const Float lower = mp::pow(Float(m) / (mp::exp(Float(1)) * Float(n)), static_cast<int>(a));
  out.lower_bound = static_cast<double>(lower);
  if (a > m) {
    out.vacuous = true;
    out.exact_fraction = "0/1";
    return out;
  }
  const mp::cpp_rational exact(binomial(m, a), binomial(n, a));
  out.exact_fraction = mp::numerator(exact).str() + "/" + mp::denominator(exact).str();
  const Float value = Float(mp::numerator(exact)) / Float(mp::denominator(exact));
  out.exact = static_cast<double>(value);
  out.dominates = value >= lower;
  return out;
}

std::string compression_precondition(Index n, unsigned a, std::size_t S, std::size_t t_u) {
  std::ostringstream os;
  if (std::uint64_t{a} * a > n) {
    os << "a <= sqrt(n) fails: a = " << a << ", n = " << n;
    return os.str();
  }
  const double lhs = static_cast<double>(t_u);
  const double rhs = 0.5 * std::log2(static_cast<double>(n)) /
                     std::log2(std::numbers::e * static_cast<double>(S) / static_cast<double>(t_u));
  if (lhs > rhs) os << "t_u <= (1/2) lg n / lg(eS/t_u) fails: " << lhs << " > " << rhs;
  return os.str();
}

FamilySize family_size_for(double p, Index n, unsigned a) {
  if (!(p > 0 && p <= 1)) throw std::invalid_argument("family size needs p in (0, 1]");
  return family_from_log2(-mp::log2(Float(p)), n, a);
}

FamilySize evaluate_family_size(Index n, unsigned a, std::size_t S, std::size_t t_u) {
  if (t_u == 0 || t_u > S) throw std::invalid_argument("family size needs 1 <= t_u <= S");
  const Float e = mp::exp(Float(1));
  // lg(1/p) = 1 + a lg e + t_u a lg(eS/t_u)
  const Float log2_inv_p = 1 + Float(a) * mp::log2(e) + Float(t_u) * a * mp::log2(e * Float(S) / Float(t_u));
  return family_from_log2(log2_inv_p, n, a);
}

FamilySize required_family_size(Index n, unsigned a, std::size_t S, std::size_t t_u) {
  const std::string failed = compression_precondition(n, a, S, t_u);
  if (!failed.empty()) throw PreconditionError(failed);
  return evaluate_family_size(n, a, S, t_u);
}

double compression_bound_bits(Index n, unsigned a, std::size_t S, std::size_t t_u, unsigned w) {
  const double e = std::numbers::e;
  const double ad = a;
  const double td = static_cast<double>(t_u);
  return ad * std::log2(e) + td * ad * std::log2(e * static_cast<double>(S) / td) + std::log2(ad) +
         std::log2(std::log2(e * static_cast<double>(n) / ad)) + 2 * td * w + 1;
}

unsigned ceil_log2(std::uint64_t x) { return x <= 1 ? 0 : 64 - static_cast<unsigned>(std::countl_zero(x - 1)); }

std::uint64_t compressed_bit_count(unsigned index_bits, std::size_t t_u, std::size_t S, unsigned w) {
  return index_bits + std::uint64_t{t_u} * (ceil_log2(S) + w);
}

PermutationFamily::PermutationFamily(Index n, FamilySize size, SketchSeed seed, bool identity_first)
    : n_(n), size_(std::move(size)), seed_(seed), identity_first_(identity_first) {
  if (n_ == 0) throw std::invalid_argument("permutation family needs n >= 1");
}

std::uint64_t PermutationFamily::seed_of(std::uint64_t i) const { return seed_.derive("perm", i).value(); }

std::vector<Index> PermutationFamily::realize(std::uint64_t i) const {
  if (!contains(i)) throw std::out_of_range("permutation index outside the family");
  Shuffle sh(n_, seed_of(i));
  if (!(identity_first_ && i == 0)) {
    for (Index s = 0; s < n_; ++s) sh.step(s);
  }
  return sh.take();
}

std::optional<std::uint64_t> find_covering_permutation(const AliceInput& input, const PermutationFamily& family,
                                                        const std::vector<bool>& covered,
                                                        std::uint64_t scan_limit) {
  if (covered.size() != family.n()) throw std::invalid_argument("coverage mask does not match the family");
  std::vector<Index> sorted = input.indices;
  std::sort(sorted.begin(), sorted.end());
  for (std::uint64_t i = 0; i < scan_limit && family.contains(i); ++i) {
    if (covers(family, i, sorted, covered)) return i;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> encode_message(const CompressedMessage& m) {
  BitWriter out;
  out.put(m.perm_index, m.index_bits);
  for (const auto& [address, contents] : m.cells) {
    out.put(address, m.address_bits);
    out.put(contents, m.w);
  }
  return out.take();
}

CompressedMessage decode_message(const std::vector<std::uint8_t>& bytes, unsigned index_bits, std::size_t t_u,
                                 unsigned address_bits, unsigned w) {
  CompressedMessage m;
  m.index_bits = index_bits;
  m.address_bits = address_bits;
  m.w = w;
  m.bit_count = index_bits + std::uint64_t{t_u} * (address_bits + w);
  if (bytes.size() != (m.bit_count + 7) / 8) throw MalformedMessage("compressed message has the wrong length");
  BitReader in(bytes);
  m.perm_index = in.get(index_bits);
  for (std::size_t c = 0; c < t_u; ++c) {
    const std::size_t address = in.get(address_bits);
    m.cells.emplace_back(address, in.get(w));
  }
  m.bytes = bytes;
  return m;
}

CompressedMessage compress(const SketchFactory& factory, SketchSeed coins, const AliceInput& input, Wide C,
                           const PermutationFamily& family, std::uint64_t perm_index, const CellSample& sample) {
  if (!family.contains(perm_index)) throw std::out_of_range("permutation index outside the family");
  auto sketch = factory.make(coins);
  Memory& mem = sketch->memory();
  mem.set_recording(false);
  const IndexMap map(family.realize(perm_index));
  for (unsigned j = 1; j <= input.indices.size(); ++j) {
    const Wide cj = *checked_pow(C, j);
    sketch->update(map.to_sketch(input.indices[j - 1]), cj);
    for (std::size_t cell : mem.op_cells()) {
      if (!std::binary_search(sample.cells.begin(), sample.cells.end(), cell)) {
        throw ContractViolation("update of index " + std::to_string(input.indices[j - 1]) + " probed cell " +
                                std::to_string(cell) + " outside the sampled set");
      }
    }
  }
  CompressedMessage m;
  m.perm_index = perm_index;
  m.index_bits = family.size().index_bits;
  m.address_bits = ceil_log2(sample.S);
  m.w = mem.word_bits();
  for (std::size_t cell : sample.cells) m.cells.emplace_back(cell, mem.peek(cell));
  m.bit_count = compressed_bit_count(m.index_bits, sample.t_u, sample.S, m.w);
  m.bytes = encode_message(m);
  return m;
}

DecodeResult decompress_and_answer(const CompressedMessage& message, const GameConfig& config,
                                   const AliceInput& truth, const PermutationFamily& family,
                                   const CellSample& sample, const SketchFactory& factory, SketchSeed coins) {
  if (!family.contains(message.perm_index)) {
    throw MalformedMessage("permutation index " + std::to_string(message.perm_index) + " is not below k = " +
                           family.size().k_decimal);
  }
  auto sketch = factory.make(coins);
  Memory& mem = sketch->memory();
  mem.set_recording(false);
  for (const auto& [address, contents] : message.cells) {
    if (address >= mem.size() || (contents & ~mem.word_mask())) throw MalformedMessage("cell outside the sketch");
    mem.restore(address, contents);
  }
  (void)sample;
  return bob_decode(*sketch, config, truth, IndexMap(family.realize(message.perm_index)));
}

std::uint64_t permutation_invariance_check(Problem problem, std::size_t trials, SketchSeed seed) {
  std::uint64_t violations = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng(seed.derive("invariance", trial));
    const Index n = 2 + rng.below(63);
    SparseVector v(n);
    const auto nonzeros = rng.below(n + 1);
    for (std::uint64_t k = 0; k < nonzeros; ++k) v.add(rng.below(n), rng.between(-100, 100));
    std::vector<Index> pi(n);
    std::iota(pi.begin(), pi.end(), 0);
    for (Index s = n - 1; s > 0; --s) std::swap(pi[s], pi[rng.below(s + 1)]);
    const SparseVector pv = v.permuted(pi);

    bool ok = true;
    switch (problem) {
      case Problem::point_query: {
        const Index t = rng.below(n);
        ok = v.get(t) == pv.get(pi[t]);
        break;
      }
      case Problem::lp_norm:
        ok = v.l1() == pv.l1() && v.l2_squared() == pv.l2_squared();
        break;
      case Problem::entropy:
        ok = v.entropy() == pv.entropy();
        break;
      case Problem::heavy_hitter: {
        const auto h = v.heavy_hitter();
        ok = h ? pv.is_valid_heavy_hitter(pi[*h]) : pv.nonzeros() == 0;
        ok = ok && v.count_valid_heavy_hitters() == pv.count_valid_heavy_hitters();
        break;
      }
    }
    violations += ok ? 0 : 1;
  }
  return violations;
}

CompressDemoReport run_compress_demo(const GameConfig& config, const CompressDemoOptions& options) {
  validate(config);
  if (config.a == 0) throw ConfigError("compression needs a >= 1");
  const SketchFactory factory = make_factory(config.sketch_params());
  const SketchSeed coins = SketchSeed(config.master_seed).derive("coins");
  auto probe = factory.make(coins);
  const CellSample sample = cell_sample(*probe);
  const std::vector<bool> mask = sample.covered_mask();

  CompressDemoReport r;
  r.sketch = probe->name();
  r.n = config.n;
  r.a = config.a;
  r.S = sample.S;
  r.t_u = sample.t_u;
  r.w = probe->memory().word_bits();
  r.covered_indices = sample.covered.size();
  r.certificate = sample.certificate_holds();
  r.precondition_detail = compression_precondition(r.n, r.a, r.S, r.t_u);
  r.precondition_met = r.precondition_detail.empty();
  r.family = evaluate_family_size(r.n, r.a, r.S, r.t_u);
  r.full_bits = std::uint64_t{r.S} * r.w;
  r.compressed_bits = compressed_bit_count(r.family.index_bits, r.t_u, r.S, r.w);
  r.bound_bits = compression_bound_bits(r.n, r.a, r.S, r.t_u, r.w);
  r.within_bound = static_cast<double>(r.compressed_bits) <= r.bound_bits;
  r.coverage = coverage_probability(r.n, r.covered_indices, r.a);

  const PermutationFamily family(r.n, r.family, SketchSeed(config.master_seed).derive("family"),
                                 options.identity_first);
  const std::uint64_t probe_perm = options.identity_first ? 1 : 0;

  r.trials.resize(config.trials);
  std::vector<char> first_hit(config.trials, 0);
  parallel_for(config.trials, config.threads, [&](std::size_t id) {
    CompressTrial& t = r.trials[id];
    t.trial_id = id;
    const AliceInput input = trial_input(config, id);
    std::vector<Index> sorted = input.indices;
    std::sort(sorted.begin(), sorted.end());
    if (family.contains(probe_perm)) first_hit[id] = covers(family, probe_perm, sorted, mask);

    auto alice = factory.make(coins);
    alice->memory().set_recording(false);
    const Message msg = alice_encode(*alice, input, config.C);
    auto bob = receive(msg, factory, coins);
    bob->memory().set_recording(false);
    const DecodeResult full = bob_decode(*bob, config, input);
    t.full_success = full.success;

    const auto perm = find_covering_permutation(input, family, mask, options.scan_limit);
    if (!perm) return;
    t.covered = true;
    t.perm_index = *perm;
    const CompressedMessage cm = compress(factory, coins, input, config.C, family, *perm, sample);
    const DecodeResult packed = decompress_and_answer(cm, config, input, family, sample, factory, coins);
    t.compressed_success = packed.success;
    t.non_erring = full.check_errors == 0 && packed.check_errors == 0;
    t.decisions_equal = full.decision_digest == packed.decision_digest && full.recovered == packed.recovered;
    t.raw_equal = full.raw_digest == packed.raw_digest;
  });

  std::size_t hits = 0;
  for (std::size_t id = 0; id < r.trials.size(); ++id) {
    const CompressTrial& t = r.trials[id];
    hits += first_hit[id] ? 1 : 0;
    r.covered_trials += t.covered ? 1 : 0;
    if (t.covered && t.non_erring) {
      ++r.non_erring_trials;
      r.equal_trials += t.decisions_equal ? 1 : 0;
    }
  }
  r.first_permutation_hit_rate = r.trials.empty() ? 0 : static_cast<double>(hits) / r.trials.size();
  r.equality_rate = r.non_erring_trials ? static_cast<double>(r.equal_trials) / r.non_erring_trials : 1.0;
  return r;
}

}  // namespace probelab
