#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ibp/predictors.hpp"

namespace ibp::extproto {

// Wire protocol for black-box predictors: one JSON object per line, keys
// sorted, no insignificant whitespace, doubles in shortest round-trip form.
// docs/protocol.md describes the messages; tests/data/golden_transcript.jsonl
// is a canonical session.
inline constexpr std::string_view kProtocolVersion = "1.0";

struct Hello {
  std::string version{kProtocolVersion};
  std::string client = "ibp-audit";
  bool operator==(const Hello&) const = default;
};

struct HelloAck {
  std::string version{kProtocolVersion};
  std::string name;
  int max_k = 1;
  int capacity = 1;
  bool operator==(const HelloAck&) const = default;
};

struct Predict {
  PredictionQuery query;
  bool operator==(const Predict&) const = default;
};

struct Samples {
  std::vector<Trajectory> trajectories;
  bool operator==(const Samples&) const = default;
};

struct ErrorReply {
  std::string message;
  bool operator==(const ErrorReply&) const = default;
};

struct Shutdown {
  bool operator==(const Shutdown&) const = default;
};

using Payload = std::variant<Hello, HelloAck, Predict, Samples, ErrorReply, Shutdown>;

struct Message {
  std::uint64_t id = 0;
  Payload payload;
  bool operator==(const Message&) const = default;
};

std::string_view kind_name(const Payload& payload);

// Canonical single-line encoding, without the trailing newline.
std::string encode(const Message& message);
// Throws kMalformedMessage; syntax errors report the byte offset.
Message decode(std::string_view line);

// Major versions must match.
bool compatible(std::string_view ours, std::string_view theirs);

// Trajectories travel as flat arrays [s0, v0, s1, v1, ...].
std::vector<double> flatten(const std::vector<AgentState>& states);
std::vector<AgentState> unflatten(const std::vector<double>& flat);

enum class Transport { kChildProcess, kTcp };

struct EndpointDescriptor {
  Transport transport = Transport::kChildProcess;
  // Shell command for kChildProcess. "{name}" placeholders are replaced
  // from `vars` before launch.
  std::string command;
  std::map<std::string, std::string> vars;
  std::string host = "127.0.0.1";
  int port = 0;
  double timeout_seconds = 30.0;

  std::string resolved_command() const;
  void validate() const;
};

// Bidirectional line stream over file descriptors.
class LineChannel {
 public:
  LineChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;
  ~LineChannel();

  void write_line(std::string_view line);
  // Throws kTimeout when no full line arrives before the deadline and
  // kPredictorFailure when the peer closes the stream.
  std::string read_line(std::chrono::milliseconds timeout);
  void close_write();

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

// A connected endpoint. One request is in flight at a time; replies whose
// id belongs to an earlier (timed out) request are discarded.
class Endpoint {
 public:
  explicit Endpoint(EndpointDescriptor descriptor);
  Endpoint(const Endpoint&) = delete;
  Endpoint& operator=(const Endpoint&) = delete;
  ~Endpoint();

  // Exchanges hello / hello_ack. Throws kVersionMismatch, kTimeout,
  // kMalformedMessage.
  HelloAck handshake();
  const std::optional<HelloAck>& capabilities() const { return capabilities_; }

  // Sends one predict and validates the answer against the query: count
  // (kShape), horizons (kShape), state validity and start state
  // (kInvariantViolation with the first offending index).
  SampleSet remote_predict(const PredictionQuery& query);

  void shutdown();
  const EndpointDescriptor& descriptor() const { return descriptor_; }

 private:
  Message exchange(const Payload& payload);

  EndpointDescriptor descriptor_;
  std::unique_ptr<LineChannel> channel_;
  int child_pid_ = -1;
  std::uint64_t next_id_ = 0;
  std::optional<HelloAck> capabilities_;
  std::mutex mutex_;
};

// Predictor backed by an endpoint. Connects and handshakes on creation.
class ExternalPredictor final : public Predictor {
 public:
  ExternalPredictor(std::string tag, EndpointDescriptor descriptor);

  const HelloAck& capabilities() const { return capabilities_; }

 protected:
  SampleSet do_predict(const PredictionQuery& query) const override;

 private:
  std::unique_ptr<Endpoint> endpoint_;
  HelloAck capabilities_;
};

std::shared_ptr<const ExternalPredictor> make_external(EndpointDescriptor descriptor, std::string tag = "external");

struct ProbeCheck {
  std::string name;
  bool passed = false;
  bool informational = false;
  std::string detail;
};

struct ProbeReport {
  std::vector<ProbeCheck> checks;
  std::optional<HelloAck> capabilities;

  // All non-informational checks passed.
  bool conformant() const;
  const ProbeCheck* find(std::string_view name) const;
};

// Runs handshake, shape, determinism, seed-honoring and a prefix-
// independence spot-check (two queries that differ only after step 4).
// Failures are collected, never thrown.
ProbeReport probe(const EndpointDescriptor& descriptor);

// Serves `predictor` over a line stream until shutdown or end of input.
// Answers every predict with samples or error; never drops a request.
void serve(std::istream& in, std::ostream& out, const Predictor& predictor, const HelloAck& capabilities);

}  // namespace ibp::extproto
