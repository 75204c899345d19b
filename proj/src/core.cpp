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

#include "vfarm/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>

namespace vfarm {

namespace {

constexpr std::uint8_t kPayloadNone = 0;
constexpr std::uint8_t kPayloadBytes = 1;
constexpr std::uint8_t kPayloadNumeric = 2;
constexpr std::uint8_t kPayloadAlgorithm = 3;
constexpr std::uint8_t kPayloadActivity = 4;
constexpr std::uint8_t kPayloadError = 5;

constexpr std::size_t kAlgorithmPayloadSize = 17;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::None: return "NONE";
    case ErrorCode::Timeout: return "TIMEOUT";
    case ErrorCode::NotRunning: return "NOT_RUNNING";
    case ErrorCode::NoMajority: return "NO_MAJORITY";
    case ErrorCode::BadState: return "BAD_STATE";
    case ErrorCode::TransportDown: return "TRANSPORT_DOWN";
    case ErrorCode::Refused: return "REFUSED";
  }
  return "UNKNOWN";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) {
  for (auto c : {ErrorCode::None, ErrorCode::Timeout, ErrorCode::NotRunning, ErrorCode::NoMajority,
                 ErrorCode::BadState, ErrorCode::TransportDown, ErrorCode::Refused}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

VoteValue VoteValue::from_bytes(std::vector<std::uint8_t> bytes) {
  if (bytes.empty()) throw std::invalid_argument("VoteValue: empty byte sequence");
  return VoteValue(std::move(bytes), false);
}

VoteValue VoteValue::from_numeric(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("VoteValue: empty numeric vector");
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 8);
  for (double d : values) put_f64(bytes, d);
  return VoteValue(std::move(bytes), true);
}

VoteValue VoteValue::from_string(std::string_view text) {
  return from_bytes(std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::optional<std::vector<double>> VoteValue::numeric_view() const {
  if (!numeric_) return std::nullopt;
  std::vector<double> out(bytes_.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f64(bytes_, i * 8);
  return out;
}

VoteValue VoteValue::corrupted(std::span<const std::uint8_t> pattern) const {
  if (pattern.empty()) return *this;
  auto bytes = bytes_;
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] ^= pattern[i % pattern.size()];
  return VoteValue(std::move(bytes), numeric_);
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("from_hex: odd length");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw std::invalid_argument("from_hex: bad digit");
  };
  std::vector<std::uint8_t> out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
  }
  return out;
}

std::string describe(const VoteValue& v) {
  if (auto xs = v.numeric_view()) {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (std::size_t i = 0; i < xs->size(); ++i) os << (i ? "," : "") << (*xs)[i];
    os << ']';
    return os.str();
  }
  return "0x" + to_hex(v.bytes());
}

std::string_view to_string(FarmState s) {
  switch (s) {
    case FarmState::Declared: return "DECLARED";
    case FarmState::Described: return "DESCRIBED";
    case FarmState::Running: return "RUNNING";
    case FarmState::Closed: return "CLOSED";
  }
  return "UNKNOWN";
}

std::vector<NodeId> FarmDescriptor::duplicate_nodes() const {
  std::map<NodeId, int> seen;
  std::vector<NodeId> dups;
  for (auto n : nodes) {
    if (++seen[n] == 2) dups.push_back(n);
  }
  return dups;
}

Result<FarmDescriptor> descriptor_add(FarmDescriptor d, NodeId node) {
  if (d.state != FarmState::Declared && d.state != FarmState::Described) return ErrorCode::BadState;
  if (!node.valid()) return ErrorCode::BadState;
  d.nodes.push_back(node);
  d.state = FarmState::Described;
  return d;
}

bool lifecycle_allows(FarmState from, FarmState to) {
  if (from == FarmState::Described && to == FarmState::Described) return true;  // further adds
  return static_cast<int>(to) == static_cast<int>(from) + 1;
}

std::string_view to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::Majority: return "majority";
    case AlgorithmKind::Median: return "median";
    case AlgorithmKind::Plurality: return "plurality";
    case AlgorithmKind::WeightedAverage: return "weighted_average";
  }
  return "unknown";
}

std::optional<AlgorithmKind> parse_algorithm(std::string_view name) {
  for (auto k : {AlgorithmKind::Majority, AlgorithmKind::Median, AlgorithmKind::Plurality,
                 AlgorithmKind::WeightedAverage}) {
    if (to_string(k) == name) return k;
  }
  if (name == "weighted-average" || name == "average") return AlgorithmKind::WeightedAverage;
  return std::nullopt;
}

std::string_view to_string(MessageTag t) {
  switch (t) {
    case MessageTag::Input: return "INPUT";
    case MessageTag::BroadcastValue: return "BROADCAST_VALUE";
    case MessageTag::BroadcastInvalid: return "BROADCAST_INVALID";
    case MessageTag::SetAlgorithm: return "SET_ALGORITHM";
    case MessageTag::SetOutput: return "SET_OUTPUT";
    case MessageTag::Get: return "GET";
    case MessageTag::Close: return "CLOSE";
    case MessageTag::Done: return "DONE";
    case MessageTag::Refused: return "REFUSED";
    case MessageTag::VotedValue: return "VOTED_VALUE";
  }
  return "UNKNOWN";
}

Direction direction_of(MessageTag t) {
  switch (t) {
    case MessageTag::BroadcastValue:
    case MessageTag::BroadcastInvalid: return Direction::VoterToVoter;
    case MessageTag::Done:
    case MessageTag::Refused:
    case MessageTag::VotedValue: return Direction::VoterToClient;
    default: return Direction::ClientToVoter;
  }
}

std::optional<std::string> check_message(const Message& m) {
  const auto tag_value = static_cast<std::uint8_t>(m.tag);
  if (tag_value < static_cast<std::uint8_t>(MessageTag::Input) ||
      tag_value > static_cast<std::uint8_t>(MessageTag::VotedValue)) {
    return "unknown tag";
  }
  const bool from_user = m.sender.is_user();
  if (direction_of(m.tag) == Direction::ClientToVoter) {
    if (!from_user) return "client request must be sent by USER";
  } else if (from_user) {
    return "voter message must carry a voter id";
  }

  const auto& p = m.payload;
  switch (m.tag) {
    case MessageTag::Input:
    case MessageTag::BroadcastValue:
      if (!std::holds_alternative<VoteValue>(p)) return "value payload required";
      if (std::get<VoteValue>(p).size() == 0) return "empty value";
      break;
    case MessageTag::SetAlgorithm:
      if (!std::holds_alternative<AlgorithmId>(p)) return "algorithm payload required";
      break;
    case MessageTag::SetOutput:
      if (!std::holds_alternative<ActivityId>(p)) return "output target payload required";
      break;
    case MessageTag::VotedValue:
      if (std::holds_alternative<VoteValue>(p)) {
        if (std::get<VoteValue>(p).size() == 0) return "empty value";
      } else if (std::holds_alternative<ErrorCode>(p)) {
        if (std::get<ErrorCode>(p) == ErrorCode::None) return "failure code must not be NONE";
      } else {
        return "voted value or failure code required";
      }
      break;
    default:
      if (!std::holds_alternative<std::monostate>(p)) return "tag carries no payload";
  }
  return std::nullopt;
}

std::vector<std::uint8_t> encode_message(const Message& msg) {
  if (auto why = check_message(msg)) throw std::invalid_argument("encode_message: " + *why);

  std::vector<std::uint8_t> body;
  std::uint8_t kind = kPayloadNone;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, VoteValue>) {
          kind = p.is_numeric() ? kPayloadNumeric : kPayloadBytes;
          body = p.bytes();
        } else if constexpr (std::is_same_v<P, AlgorithmId>) {
          kind = kPayloadAlgorithm;
          body.push_back(static_cast<std::uint8_t>(p.kind));
          put_f64(body, p.epsilon);
          put_f64(body, p.scaling_factor);
        } else if constexpr (std::is_same_v<P, ActivityId>) {
          kind = kPayloadActivity;
          put_u32(body, p.value);
        } else if constexpr (std::is_same_v<P, ErrorCode>) {
          kind = kPayloadError;
          body.push_back(static_cast<std::uint8_t>(p));
        }
      },
      msg.payload);

  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + body.size());
  out.push_back(static_cast<std::uint8_t>(msg.tag));
  put_u32(out, msg.sender.value);
  put_u32(out, msg.round);
  put_u32(out, msg.ref);
  out.push_back(kind);
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Message decode_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw MalformedFrame("frame shorter than header");
  Message m;
  m.tag = static_cast<MessageTag>(bytes[0]);
  m.sender = VoterId{get_u32(bytes, 1)};
  m.round = get_u32(bytes, 5);
  m.ref = get_u32(bytes, 9);
  const std::uint8_t kind = bytes[13];
  const std::uint32_t length = get_u32(bytes, 14);
  if (length > bytes.size() - kFrameHeaderSize) throw MalformedFrame("declared payload exceeds frame");
  if (length < bytes.size() - kFrameHeaderSize) throw MalformedFrame("trailing bytes after payload");
  const auto body = bytes.subspan(kFrameHeaderSize, length);

  switch (kind) {
    case kPayloadNone:
      if (length != 0) throw MalformedFrame("payload-free kind with non-zero length");
      break;
    case kPayloadBytes:
      if (length == 0) throw MalformedFrame("empty value");
      m.payload = VoteValue::from_bytes({body.begin(), body.end()});
      break;
    case kPayloadNumeric: {
      if (length == 0 || length % 8 != 0) throw MalformedFrame("numeric length not a multiple of 8");
      std::vector<double> xs(length / 8);
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = get_f64(body, i * 8);
      m.payload = VoteValue::from_numeric(xs);
      break;
    }
    case kPayloadAlgorithm: {
      if (length != kAlgorithmPayloadSize) throw MalformedFrame("bad algorithm payload length");
      if (body[0] > static_cast<std::uint8_t>(AlgorithmKind::WeightedAverage)) {
        throw MalformedFrame("unknown algorithm kind");
      }
      AlgorithmId a{static_cast<AlgorithmKind>(body[0]), get_f64(body, 1), get_f64(body, 9)};
      if (!(a.epsilon >= 0.0)) throw MalformedFrame("negative epsilon");
      m.payload = a;
      break;
    }
    case kPayloadActivity:
      if (length != 4) throw MalformedFrame("bad activity payload length");
      m.payload = ActivityId{get_u32(body, 0)};
      break;
    case kPayloadError:
      if (length != 1 || body[0] > static_cast<std::uint8_t>(ErrorCode::Refused)) {
        throw MalformedFrame("bad error payload");
      }
      m.payload = static_cast<ErrorCode>(body[0]);
      break;
    default:
      throw MalformedFrame("unknown payload kind");
  }
  if (auto why = check_message(m)) throw MalformedFrame(*why);
  return m;
}

}  // namespace vfarm
