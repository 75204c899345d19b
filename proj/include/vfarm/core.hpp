// Copyright 2026 The vfarm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vfarm {

/// Outcome of a farm operation. `None` is the initial, fault-free value.
enum class ErrorCode : std::uint8_t {
  None = 0,
  Timeout,
  NotRunning,
  NoMajority,
  BadState,
  TransportDown,
  Refused,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view name);

/// Either a value or a non-`None` error code.
template <class T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}  // NOLINT(implicit)
  Result(ErrorCode error) : error_(error) {       // NOLINT(implicit)
    if (error == ErrorCode::None) throw std::invalid_argument("Result: error must not be None");
  }

  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }
  ErrorCode error() const { return error_; }

  const T& value() const& {
    if (!value_) throw std::logic_error("Result: no value (" + std::string(to_string(error_)) + ")");
    return *value_;
  }
  T& value() & {
    if (!value_) throw std::logic_error("Result: no value (" + std::string(to_string(error_)) + ")");
    return *value_;
  }
  T&& value() && { return std::move(value()); }
  const T* operator->() const { return &value(); }
  T* operator->() { return &value(); }

 private:
  std::optional<T> value_;
  ErrorCode error_ = ErrorCode::None;
};

/// 1-based position of a voter in its farm. Value 0 is reserved for the user module
/// when used as a message sender.
struct VoterId {
  std::uint32_t value = 0;

  static constexpr VoterId user() { return VoterId{0}; }
  constexpr bool is_user() const { return value == 0; }
  constexpr std::size_t index() const { return value - 1; }
  friend constexpr auto operator<=>(VoterId, VoterId) = default;
};

/// Processing node identifier; valid ids are > 0.
struct NodeId {
  std::uint32_t value = 0;

  constexpr bool valid() const { return value > 0; }
  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

/// Any endpoint placed in a fabric: user module, voter, or other consumer.
struct ActivityId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(ActivityId, ActivityId) = default;
};

/// Opaque payload being voted on. A numeric value is a vector of doubles stored in its
/// canonical little-endian encoding, so byte equality stays meaningful.
class VoteValue {
 public:
  VoteValue() = default;

  static VoteValue from_bytes(std::vector<std::uint8_t> bytes);
  static VoteValue from_numeric(std::span<const double> values);
  static VoteValue scalar(double v) { return from_numeric(std::span<const double>(&v, 1)); }
  static VoteValue from_string(std::string_view text);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }
  bool is_numeric() const { return numeric_; }

  /// Decoded doubles; empty optional when the value is not numeric.
  std::optional<std::vector<double>> numeric_view() const;

  /// XORs the payload cyclically with `pattern`; keeps the numeric flag.
  VoteValue corrupted(std::span<const std::uint8_t> pattern) const;

  friend bool operator==(const VoteValue&, const VoteValue&) = default;

 private:
  VoteValue(std::vector<std::uint8_t> bytes, bool numeric) : bytes_(std::move(bytes)), numeric_(numeric) {}

  std::vector<std::uint8_t> bytes_;
  bool numeric_ = false;
};

inline bool byte_equal(const VoteValue& a, const VoteValue& b) { return a.bytes() == b.bytes(); }

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);
std::string describe(const VoteValue& v);

/// One voter's view of one participant's input. `valid == false` is the faulty bit.
struct ValueSlot {
  std::optional<VoteValue> value;
  bool valid = false;
  VoterId origin;

  static ValueSlot of(VoteValue v, VoterId origin = {}) { return ValueSlot{std::move(v), true, origin}; }
  static ValueSlot invalid(VoterId origin = {}) { return ValueSlot{std::nullopt, false, origin}; }
};

enum class FarmState : std::uint8_t { Declared, Described, Running, Closed };
std::string_view to_string(FarmState s);

struct FarmDescriptor {
  std::vector<NodeId> nodes;
  std::string metric_id = "discrete";
  FarmState state = FarmState::Declared;

  std::size_t cardinality() const { return nodes.size(); }
  /// Node ids appearing more than once; allowed, but worth reporting.
  std::vector<NodeId> duplicate_nodes() const;
};

/// Appends `node`; Declared/Described only. Node 0 is rejected.
Result<FarmDescriptor> descriptor_add(FarmDescriptor d, NodeId node);
/// Legal lifecycle step (no skipping, no going back).
bool lifecycle_allows(FarmState from, FarmState to);

enum class AlgorithmKind : std::uint8_t { Majority = 0, Median = 1, Plurality = 2, WeightedAverage = 3 };
std::string_view to_string(AlgorithmKind k);
std::optional<AlgorithmKind> parse_algorithm(std::string_view name);

struct AlgorithmId {
  AlgorithmKind kind = AlgorithmKind::Majority;
  double epsilon = 0.0;
  double scaling_factor = 1.0;

  friend bool operator==(const AlgorithmId&, const AlgorithmId&) = default;
};

enum class MessageTag : std::uint8_t {
  Input = 1,
  BroadcastValue,
  BroadcastInvalid,
  SetAlgorithm,
  SetOutput,
  Get,
  Close,
  Done,
  Refused,
  VotedValue,
};
std::string_view to_string(MessageTag t);

enum class Direction : std::uint8_t { ClientToVoter, VoterToVoter, VoterToClient };
Direction direction_of(MessageTag t);

using Payload = std::variant<std::monostate, VoteValue, AlgorithmId, ActivityId, ErrorCode>;

/// Protocol message. `round` is the voting round it belongs to (0 when not round-bound);
/// `ref` is a client request id, echoed in the reply to GET/CLOSE (0 when unsolicited).
struct Message {
  MessageTag tag = MessageTag::Close;
  VoterId sender;
  std::uint32_t round = 0;
  std::uint32_t ref = 0;
  Payload payload;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Empty when `m` satisfies the tag/payload/sender invariants, otherwise the reason.
std::optional<std::string> check_message(const Message& m);

class MalformedFrame : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frame layout, all integers little-endian:
///   tag:u8 sender:u32 round:u32 ref:u32 kind:u8 length:u32 payload[length]
inline constexpr std::size_t kFrameHeaderSize = 18;

std::vector<std::uint8_t> encode_message(const Message& msg);
/// Throws MalformedFrame on truncated, oversized, or illegal frames.
Message decode_message(std::span<const std::uint8_t> bytes);

}  // namespace vfarm
