#include "probelab/memory.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace probelab {

Memory::Memory(std::size_t words, unsigned word_bits)
    : words_(words, 0),
      word_bits_(word_bits),
      mask_(word_bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << word_bits) - 1) {
  if (word_bits == 0 || word_bits > 64) throw std::invalid_argument("word size must be in [1, 64]");
}

void Memory::out_of_range(std::size_t cell) {
  throw std::out_of_range("cell index " + std::to_string(cell) + " out of range");
}

void Memory::note(std::size_t cell, ProbeKind kind) {
  if (recording_) log_.push_back(ProbeEvent{op_id_, cell, kind});
  if (depth_ > 0 && op_kind_ == OpKind::update &&
      std::find(op_cells_.begin(), op_cells_.end(), cell) == op_cells_.end()) {
    op_cells_.push_back(cell);
  }
}

void Memory::write(std::size_t cell, std::uint64_t value) {
  if (value & ~mask_) throw std::out_of_range("value exceeds word size");
  touch(cell, ProbeKind::write);
  words_[cell] = value;
}

std::uint64_t Memory::peek(std::size_t cell) const { return words_.at(cell); }

void Memory::restore(std::size_t cell, std::uint64_t value) {
  if (value & ~mask_) throw std::out_of_range("value exceeds word size");
  words_.at(cell) = value;
}

Memory::OpScope Memory::open(OpKind kind) {
  if (depth_++ == 0) {
    ++op_id_;
    op_kind_ = kind;
    op_touches_ = 0;
    op_cells_.clear();
  }
  return OpScope(*this);
}

Memory::OpScope::~OpScope() { --mem_.depth_; }

CellRegion::CellRegion(std::shared_ptr<Memory> mem, std::size_t base, std::size_t size)
    : mem_(std::move(mem)), base_(base), size_(size) {
  if (!mem_ || base_ + size_ > mem_->size()) throw std::out_of_range("cell region outside memory");
}

CellRegion CellRegion::sub(std::size_t offset, std::size_t size) const {
  if (offset + size > size_) throw std::out_of_range("sub-region outside region");
  return CellRegion(mem_, base_ + offset, size);
}

unsigned words_for_bits(unsigned counter_bits, unsigned word_bits) {
  if (word_bits == 0) throw std::invalid_argument("word size must be positive");
  return (counter_bits + word_bits - 1) / word_bits;
}

CounterArray::CounterArray(CellRegion region, std::size_t counters, unsigned counter_words)
    : region_(std::move(region)), counters_(counters), counter_words_(counter_words) {
  const unsigned w = region_.memory().word_bits();
  if (counter_words_ == 0 || counter_words_ * w > 128) {
    throw std::invalid_argument("counter width must be between 1 word and 128 bits");
  }
  if (words_required(counters_, counter_words_) > region_.size()) {
    throw std::out_of_range("counter array does not fit its region");
  }
  bits_ = counter_words_ * w;
}

Wide CounterArray::capacity() const {
  return static_cast<Wide>((UWide{1} << (bits_ - 1)) - 1);
}

void CounterArray::add(std::size_t counter, Wide delta) {
  Memory& mem = region_.memory();
  const unsigned w = mem.word_bits();
  const std::size_t first = region_.global(counter * counter_words_);
  UWide value = 0;
  for (unsigned k = 0; k < counter_words_; ++k) value |= static_cast<UWide>(mem.read(first + k)) << (k * w);
  value += static_cast<UWide>(delta);
  for (unsigned k = 0; k < counter_words_; ++k) {
    mem.write(first + k, static_cast<std::uint64_t>(value >> (k * w)) & mem.word_mask());
  }
}

Wide CounterArray::get(std::size_t counter) const {
  Memory& mem = region_.memory();
  const unsigned w = mem.word_bits();
  const std::size_t first = region_.global(counter * counter_words_);
  if (counter_words_ == 1) {
    const unsigned shift = 64 - w;
    return static_cast<std::int64_t>(mem.read(first) << shift) >> shift;
  }
  if (bits_ == 128) {
    UWide value = 0;
    for (unsigned k = 0; k < counter_words_; ++k) value |= static_cast<UWide>(mem.read(first + k)) << (k * w);
    return static_cast<Wide>(value);
  }
  UWide value = 0;
  for (unsigned k = 0; k < counter_words_; ++k) value |= static_cast<UWide>(mem.read(first + k)) << (k * w);
  if (bits_ < 128) {
    const UWide sign = UWide{1} << (bits_ - 1);
    value &= (UWide{1} << bits_) - 1;
    if (value & sign) value |= ~((UWide{1} << bits_) - 1);
  }
  return static_cast<Wide>(value);
}

void CounterArray::cells_of(std::size_t counter, std::vector<std::size_t>& out) const {
  const std::size_t first = region_.global(counter * counter_words_);
  for (unsigned k = 0; k < counter_words_; ++k) out.push_back(first + k);
}

std::vector<std::uint8_t> pack_words(std::span<const std::uint64_t> words, unsigned word_bits) {
  const std::size_t total_bits = words.size() * word_bits;
  std::vector<std::uint8_t> out((total_bits + 7) / 8, 0);
  std::size_t bit = 0;
  for (std::uint64_t word : words) {
    for (unsigned k = 0; k < word_bits; ++k, ++bit) {
      if ((word >> k) & 1) out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
  }
  return out;
}

std::vector<std::uint64_t> unpack_words(std::span<const std::uint8_t> bytes, std::size_t count, unsigned word_bits) {
  if (bytes.size() * 8 < count * word_bits) throw std::invalid_argument("packed image too short");
  std::vector<std::uint64_t> out(count, 0);
  std::size_t bit = 0;
  for (auto& word : out) {
    for (unsigned k = 0; k < word_bits; ++k, ++bit) {
      if ((bytes[bit / 8] >> (bit % 8)) & 1) word |= std::uint64_t{1} << k;
    }
  }
  return out;
}

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint64_t u64() { return little(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(little(4)); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::invalid_argument("truncated memory image");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t little(std::size_t width) {
    auto s = take(width);
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < width; ++k) v |= static_cast<std::uint64_t>(s[k]) << (8 * k);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint8_t kMagic[4] = {'P', 'L', 'M', 'I'};

}  // namespace

std::vector<std::uint8_t> serialize_image(const ImageHeader& header, const Memory& mem) {
  if (header.S != mem.size() || header.w != mem.word_bits()) {
    throw std::invalid_argument("image header does not describe this memory");
  }
  std::vector<std::uint8_t> body(std::begin(kMagic), std::end(kMagic));
  put_u64(body, header.n);
  put_u64(body, header.S);
  put_u64(body, header.t_u);
  put_u32(body, header.w);
  put_u64(body, header.master_seed);
  put_u32(body, static_cast<std::uint32_t>(header.sketch_name.size()));
  body.insert(body.end(), header.sketch_name.begin(), header.sketch_name.end());
  const auto packed = pack_words(mem.words(), mem.word_bits());
  body.insert(body.end(), packed.begin(), packed.end());

  std::vector<std::uint8_t> out;
  out.reserve(body.size() + 8);
  put_u64(out, body.size());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

DecodedImage deserialize_image(std::span<const std::uint8_t> bytes) {
  ByteReader outer(bytes);
  const std::uint64_t length = outer.u64();
  if (length != outer.remaining()) throw std::invalid_argument("memory image length prefix mismatch");
  ByteReader in(outer.take(length));
  auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) throw std::invalid_argument("bad image magic");
  DecodedImage img;
  img.header.n = in.u64();
  img.header.S = in.u64();
  img.header.t_u = in.u64();
  img.header.w = in.u32();
  img.header.master_seed = in.u64();
  const std::uint32_t name_len = in.u32();
  auto name = in.take(name_len);
  img.header.sketch_name.assign(name.begin(), name.end());
  if (img.header.w == 0 || img.header.w > 64) throw std::invalid_argument("bad word size in image");
  const std::size_t payload = (img.header.S * img.header.w + 7) / 8;
  if (in.remaining() != payload) throw std::invalid_argument("image payload size mismatch");
  img.words = unpack_words(in.take(payload), img.header.S, img.header.w);
  return img;
}

}  // namespace probelab
