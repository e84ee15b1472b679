#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "probelab/wide.hpp"

namespace probelab {

enum class ProbeKind : std::uint8_t { read, write };
enum class OpKind : std::uint8_t { update, query };

struct ProbeEvent {
  std::uint64_t op_id = 0;
  std::size_t cell = 0;
  ProbeKind kind = ProbeKind::read;

  friend bool operator==(const ProbeEvent&, const ProbeEvent&) = default;
};

/// S words of w bits. Every read and write through read()/write() is a probe:
/// it is counted, attributed to the current operation, and (while recording)
/// appended to the probe log. peek()/restore() bypass accounting and exist
/// only for serialization and message reconstruction.
class Memory {
 public:
  Memory(std::size_t words, unsigned word_bits);

  std::size_t size() const { return words_.size(); }
  unsigned word_bits() const { return word_bits_; }
  std::uint64_t word_mask() const { return mask_; }

  std::uint64_t read(std::size_t cell) {
    touch(cell, ProbeKind::read);
    return words_[cell];
  }
  /// value must fit in word_bits; throws std::out_of_range otherwise.
  void write(std::size_t cell, std::uint64_t value);

  std::uint64_t peek(std::size_t cell) const;
  void restore(std::size_t cell, std::uint64_t value);
  std::span<const std::uint64_t> words() const { return words_; }

  /// Brackets one sketch operation. Nested scopes join the enclosing
  /// operation, so composite sketches count as a single update or query.
  class OpScope {
   public:
    OpScope(const OpScope&) = delete;
    OpScope& operator=(const OpScope&) = delete;
    ~OpScope();

   private:
    friend class Memory;
    explicit OpScope(Memory& mem) : mem_(mem) {}
    Memory& mem_;
  };
  [[nodiscard]] OpScope open(OpKind kind);

  std::uint64_t op_id() const { return op_id_; }
  OpKind op_kind() const { return op_kind_; }
  /// Distinct cells touched by the current (or most recent) update operation.
  const std::vector<std::size_t>& op_cells() const { return op_cells_; }
  /// Probe events in the current (or most recent) operation.
  std::uint64_t op_touches() const { return op_touches_; }

  /// Total probes since creation, recorded or not.
  std::uint64_t touches() const { return touches_; }
  const std::vector<ProbeEvent>& log() const { return log_; }
  /// When off, probes are still counted but no longer appended to the log.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

 private:
  void touch(std::size_t cell, ProbeKind kind) {
    if (cell >= words_.size()) out_of_range(cell);
    ++touches_;
    ++op_touches_;
    if (recording_ || (depth_ > 0 && op_kind_ == OpKind::update)) note(cell, kind);
  }
  [[noreturn]] static void out_of_range(std::size_t cell);
  void note(std::size_t cell, ProbeKind kind);

  std::vector<std::uint64_t> words_;
  unsigned word_bits_;
  std::uint64_t mask_;
  std::vector<ProbeEvent> log_;
  std::vector<std::size_t> op_cells_;
  std::uint64_t op_id_ = 0;
  std::uint64_t op_touches_ = 0;
  std::uint64_t touches_ = 0;
  unsigned depth_ = 0;
  OpKind op_kind_ = OpKind::update;
  bool recording_ = true;
};

/// A contiguous window of a shared Memory. Sketch components address cells
/// relative to their region; footprints are reported in global cell indices.
class CellRegion {
 public:
  CellRegion() = default;
  CellRegion(std::shared_ptr<Memory> mem, std::size_t base, std::size_t size);

  Memory& memory() const { return *mem_; }
  const std::shared_ptr<Memory>& shared_memory() const { return mem_; }
  std::size_t base() const { return base_; }
  std::size_t size() const { return size_; }
  std::size_t global(std::size_t local) const { return base_ + local; }
  CellRegion sub(std::size_t offset, std::size_t size) const;

 private:
  std::shared_ptr<Memory> mem_;
  std::size_t base_ = 0;
  std::size_t size_ = 0;
};

/// Signed counters of counter_words adjacent words each, two's complement
/// over counter_words * w bits (at most 128). Arithmetic wraps modulo that
/// width.
class CounterArray {
 public:
  CounterArray() = default;
  CounterArray(CellRegion region, std::size_t counters, unsigned counter_words);

  static std::size_t words_required(std::size_t counters, unsigned counter_words) {
    return counters * counter_words;
  }

  std::size_t count() const { return counters_; }
  unsigned counter_words() const { return counter_words_; }
  unsigned bits() const { return bits_; }
  /// Largest magnitude representable without wrapping.
  Wide capacity() const;

  void add(std::size_t counter, Wide delta);
  Wide get(std::size_t counter) const;
  /// Global cell indices occupied by one counter.
  void cells_of(std::size_t counter, std::vector<std::size_t>& out) const;

 private:
  CellRegion region_;
  std::size_t counters_ = 0;
  unsigned counter_words_ = 1;
  unsigned bits_ = 64;
};

/// Counter words needed to hold counter_bits with w-bit words.
unsigned words_for_bits(unsigned counter_bits, unsigned word_bits);

/// Packs words LSB-first into ceil(count * w / 8) bytes.
std::vector<std::uint8_t> pack_words(std::span<const std::uint64_t> words, unsigned word_bits);
std::vector<std::uint64_t> unpack_words(std::span<const std::uint8_t> bytes, std::size_t count, unsigned word_bits);

struct ImageHeader {
  std::uint64_t n = 0;
  std::uint64_t S = 0;
  std::uint64_t t_u = 0;
  std::uint32_t w = 0;
  std::uint64_t master_seed = 0;
  std::string sketch_name;

  friend bool operator==(const ImageHeader&, const ImageHeader&) = default;
};

/// Length-prefixed image: u64 length, "PLMI", header fields (little-endian),
/// then S little-endian w-bit words bit-packed.
std::vector<std::uint8_t> serialize_image(const ImageHeader& header, const Memory& mem);

struct DecodedImage {
  ImageHeader header;
  std::vector<std::uint64_t> words;
};
DecodedImage deserialize_image(std::span<const std::uint8_t> bytes);

}  // namespace probelab
