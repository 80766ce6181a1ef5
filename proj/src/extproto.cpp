#include "ibp/extproto.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include "ibp/error.hpp"
#include "json.hpp"

extern char** environ;

namespace ibp::extproto {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { fail(ErrorCode::kMalformedMessage, what); }

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) malformed(std::string("missing field '") + name + "'");
  return *it;
}

double get_double(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number()) malformed(std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

std::uint64_t get_u64(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_unsigned()) malformed(std::string("field '") + name + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

int get_int(const json& j, const char* name) {
  const auto u = get_u64(j, name);
  if (u > 1'000'000'000ULL) malformed(std::string("field '") + name + "' is out of range");
  return static_cast<int>(u);
}

std::string get_string(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) malformed(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> get_numbers(const json& v, const std::string& what) {
  if (!v.is_array()) malformed(what + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) malformed(what + " must hold numbers only");
    out.push_back(x.get<double>());
  }
  return out;
}

AgentState get_state(const json& j, const char* name) {
  const auto xs = get_numbers(field(j, name), std::string("field '") + name + "'");
  if (xs.size() != 2) malformed(std::string("field '") + name + "' must be [s, v]");
  return {xs[0], xs[1]};
}

json state_json(const AgentState& s) { return json::array({s.s, s.v}); }

json params_json(const IdmParams& p) {
  return {{"T", p.T},     {"a", p.a},   {"b", p.b},         {"delta", p.delta},           {"dt", p.dt},
          {"s0", p.s0},   {"sigma", p.sigma}, {"v0", p.v0}, {"far_target", p.far_target}};
}

IdmParams params_from(const json& j) {
  if (!j.is_object()) malformed("field 'params' must be an object");
  IdmParams p;
  p.T = get_double(j, "T");
  p.a = get_double(j, "a");
  p.b = get_double(j, "b");
  p.delta = get_double(j, "delta");
  p.dt = get_double(j, "dt");
  p.s0 = get_double(j, "s0");
  p.sigma = get_double(j, "sigma");
  p.v0 = get_double(j, "v0");
  p.far_target = get_double(j, "far_target");
  return p;
}

json scenario_json(const Scenario& s) {
  return {{"human0", state_json(s.human0)},
          {"robot0", state_json(s.robot0)},
          {"params", params_json(s.params)},
          {"horizon", s.horizon},
          {"geometry", s.geometry},
          {"collision_threshold", s.collision_threshold}};
}

Scenario scenario_from(const json& j) {
  if (!j.is_object()) malformed("field 'scenario' must be an object");
  Scenario s;
  s.human0 = get_state(j, "human0");
  s.robot0 = get_state(j, "robot0");
  s.params = params_from(field(j, "params"));
  s.horizon = get_int(j, "horizon");
  s.geometry = get_double(j, "geometry");
  s.collision_threshold = get_double(j, "collision_threshold");
  return s;
}

json seed_json(const SeedKey& k) {
  return {{"root", k.root}, {"scenario_id", k.scenario_id}, {"trial", k.trial}, {"role", std::string(to_string(k.role))}};
}

SeedKey seed_from(const json& j) {
  if (!j.is_object()) malformed("field 'seed' must be an object");
  SeedKey k;
  k.root = get_u64(j, "root");
  k.scenario_id = get_u64(j, "scenario_id");
  k.trial = get_u64(j, "trial");
  const auto role = seed_role_from_string(get_string(j, "role"));
  if (!role) malformed("unknown seed role '" + get_string(j, "role") + "'");
  k.role = *role;
  return k;
}

std::vector<AgentState> states_from(const json& v, const std::string& what) {
  const auto flat = get_numbers(v, what);
  if (flat.size() % 2 != 0) malformed(what + " must have an even number of entries");
  return unflatten(flat);
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};

}  // namespace

std::vector<double> flatten(const std::vector<AgentState>& states) {
  std::vector<double> out;
  out.reserve(2 * states.size());
  for (const auto& s : states) {
    out.push_back(s.s);
    out.push_back(s.v);
  }
  return out;
}

std::vector<AgentState> unflatten(const std::vector<double>& flat) {
  require(flat.size() % 2 == 0, ErrorCode::kShape, "flat trajectory must have an even length");
  std::vector<AgentState> out(flat.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {flat[2 * i], flat[2 * i + 1]};
  return out;
}

std::string_view kind_name(const Payload& payload) {
  return std::visit(Overloaded{[](const Hello&) { return std::string_view("hello"); },
                               [](const HelloAck&) { return std::string_view("hello_ack"); },
                               [](const Predict&) { return std::string_view("predict"); },
                               [](const Samples&) { return std::string_view("samples"); },
                               [](const ErrorReply&) { return std::string_view("error"); },
                               [](const Shutdown&) { return std::string_view("shutdown"); }},
                    payload);
}

std::string encode(const Message& message) {
  json j = {{"id", message.id}, {"kind", std::string(kind_name(message.payload))}};
  std::visit(Overloaded{[&](const Hello& m) {
                          j["version"] = m.version;
                          j["client"] = m.client;
                        },
                        [&](const HelloAck& m) {
                          j["version"] = m.version;
                          j["name"] = m.name;
                          j["max_k"] = m.max_k;
                          j["capacity"] = m.capacity;
                        },
                        [&](const Predict& m) {
                          j["scenario"] = scenario_json(m.query.scenario);
                          j["robot_future"] = flatten(m.query.robot_future.states);
                          j["k"] = m.query.k;
                          j["seed"] = seed_json(m.query.seed);
                        },
                        [&](const Samples& m) {
                          json arr = json::array();
                          for (const auto& t : m.trajectories) arr.push_back(flatten(t.states));
                          j["trajectories"] = std::move(arr);
                        },
                        [&](const ErrorReply& m) { j["message"] = m.message; },
                        [&](const Shutdown&) {}},
             message.payload);
  return j.dump();
}

Message decode(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    malformed("not valid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!j.is_object()) malformed("message must be a JSON object");
  Message m;
  m.id = get_u64(j, "id");
  const auto kind = get_string(j, "kind");
  if (kind == "hello") {
    m.payload = Hello{get_string(j, "version"), get_string(j, "client")};
  } else if (kind == "hello_ack") {
    HelloAck ack{get_string(j, "version"), get_string(j, "name"), get_int(j, "max_k"), get_int(j, "capacity")};
    m.payload = ack;
  } else if (kind == "predict") {
    Predict p;
    p.query.scenario = scenario_from(field(j, "scenario"));
    p.query.robot_future.states = states_from(field(j, "robot_future"), "field 'robot_future'");
    p.query.k = get_int(j, "k");
    p.query.seed = seed_from(field(j, "seed"));
    m.payload = std::move(p);
  } else if (kind == "samples") {
    const auto& arr = field(j, "trajectories");
    if (!arr.is_array()) malformed("field 'trajectories' must be an array");
    Samples s;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      s.trajectories.push_back(Trajectory{states_from(arr[i], "trajectory " + std::to_string(i))});
    }
    m.payload = std::move(s);
  } else if (kind == "error") {
    m.payload = ErrorReply{get_string(j, "message")};
  } else if (kind == "shutdown") {
    m.payload = Shutdown{};
  } else {
    malformed("unknown message kind '" + kind + "'");
  }
  return m;
}

bool compatible(std::string_view ours, std::string_view theirs) {
  auto major = [](std::string_view v) { return v.substr(0, v.find('.')); };
  return !theirs.empty() && major(ours) == major(theirs);
}

std::string EndpointDescriptor::resolved_command() const {
  std::string out = command;
  for (const auto& [key, value] : vars) {
    const std::string placeholder = "{" + key + "}";
    for (auto pos = out.find(placeholder); pos != std::string::npos; pos = out.find(placeholder, pos + value.size())) {
      out.replace(pos, placeholder.size(), value);
    }
  }
  return out;
}

void EndpointDescriptor::validate() const {
  require(timeout_seconds > 0.0, ErrorCode::kConfig, "endpoint timeout must be > 0");
  if (transport == Transport::kChildProcess) {
    require(!command.empty(), ErrorCode::kConfig, "endpoint command is empty");
    const auto resolved = resolved_command();
    const auto open = resolved.find('{');
    if (open != std::string::npos && resolved.find('}', open) != std::string::npos) {
      fail(ErrorCode::kConfig, "endpoint command has an unresolved placeholder: " + resolved);
    }
  } else {
    require(!host.empty(), ErrorCode::kConfig, "endpoint host is empty");
    require(port > 0 && port < 65536, ErrorCode::kConfig, "endpoint port must be in 1..65535");
  }
}

LineChannel::~LineChannel() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
}

void LineChannel::close_write() {
  if (write_fd_ < 0) return;
  if (write_fd_ == read_fd_) {
    ::shutdown(write_fd_, SHUT_WR);
  } else {
    ::close(write_fd_);
  }
  write_fd_ = -1;
}

void LineChannel::write_line(std::string_view line) {
  require(write_fd_ >= 0, ErrorCode::kPredictorFailure, "endpoint stream is closed");
  std::string data(line);
  data.push_back('\n');
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kPredictorFailure, std::string("write to endpoint failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::string LineChannel::read_line(std::chrono::milliseconds timeout) {
  constexpr std::size_t kMaxLine = 256u << 20;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    require(buffer_.size() < kMaxLine, ErrorCode::kMalformedMessage, "line exceeds 256 MiB");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) fail(ErrorCode::kTimeout, "no reply within " + std::to_string(timeout.count()) + " ms");
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kPredictorFailure, std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      fail(ErrorCode::kPredictorFailure, std::string("read from endpoint failed: ") + std::strerror(errno));
    }
    if (n == 0) fail(ErrorCode::kPredictorFailure, "endpoint closed the stream");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

std::chrono::milliseconds to_ms(double seconds) {
  return std::chrono::milliseconds(static_cast<long long>(std::ceil(seconds * 1000.0)));
}

// Writing to a pipe whose reader died must surface as an error, not kill us.
void ignore_sigpipe() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

int spawn_child(const std::string& command, int& to_child, int& from_child) {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) fail(ErrorCode::kIo, "pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    fail(ErrorCode::kIo, "pipe failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    fail(ErrorCode::kPredictorFailure, "cannot launch endpoint: " + std::string(std::strerror(rc)));
  }
  to_child = in_pipe[1];
  from_child = out_pipe[0];
  return pid;
}

int connect_tcp(const std::string& host, int port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
  if (rc != 0) fail(ErrorCode::kPredictorFailure, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  std::string last_error = "no address";
  bool timed_out = false;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
    if (fd < 0) continue;
    int status = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (status != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      if (::poll(&pfd, 1, static_cast<int>(timeout.count())) == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        status = err == 0 ? 0 : -1;
        errno = err;
      } else {
        status = -1;
        errno = ETIMEDOUT;
        timed_out = true;
      }
    }
    if (status == 0) {
      ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
      ::freeaddrinfo(res);
      return fd;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (timed_out) {
    fail(ErrorCode::kTimeout, "connect to " + host + ":" + std::to_string(port) + " timed out");
  }
  fail(ErrorCode::kPredictorFailure, "cannot connect to " + host + ":" + std::to_string(port) + ": " + last_error);
}

}  // namespace

Endpoint::Endpoint(EndpointDescriptor descriptor) : descriptor_(std::move(descriptor)) {
  descriptor_.validate();
  ignore_sigpipe();
  if (descriptor_.transport == Transport::kChildProcess) {
    int to_child = -1;
    int from_child = -1;
    child_pid_ = spawn_child(descriptor_.resolved_command(), to_child, from_child);
    channel_ = std::make_unique<LineChannel>(from_child, to_child);
  } else {
    const int fd = connect_tcp(descriptor_.host, descriptor_.port, to_ms(descriptor_.timeout_seconds));
    channel_ = std::make_unique<LineChannel>(fd, fd);
  }
}

Endpoint::~Endpoint() {
  try {
    shutdown();
  } catch (...) {
  }
}

void Endpoint::shutdown() {
  std::lock_guard lock(mutex_);
  if (!channel_) return;
  try {
    channel_->write_line(encode(Message{next_id_++, Shutdown{}}));
  } catch (const Error&) {
  }
  channel_->close_write();
  if (child_pid_ > 0) {
    // Grace period for a clean exit, then kill the whole process group.
    int status = 0;
    bool exited = false;
    for (int i = 0; i < 50 && !exited; ++i) {
      exited = ::waitpid(child_pid_, &status, WNOHANG) == child_pid_;
      if (!exited) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    if (!exited) {
      ::kill(-child_pid_, SIGKILL);
      ::waitpid(child_pid_, &status, 0);
    }
    child_pid_ = -1;
  }
  channel_.reset();
}

Message Endpoint::exchange(const Payload& payload) {
  require(channel_ != nullptr, ErrorCode::kPredictorFailure, "endpoint is shut down");
  const std::uint64_t id = next_id_++;
  channel_->write_line(encode(Message{id, payload}));
  const auto timeout = to_ms(descriptor_.timeout_seconds);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) fail(ErrorCode::kTimeout, "no reply to message " + std::to_string(id));
    std::string line;
    try {
      line = channel_->read_line(left);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTimeout) throw;
      char limit[32];
      std::snprintf(limit, sizeof limit, "%g", descriptor_.timeout_seconds);
      fail(ErrorCode::kTimeout, "no reply to message " + std::to_string(id) + " within " + limit + " s");
    }
    Message reply = decode(line);
    if (reply.id < id) continue;  // late answer to a request that timed out
    if (reply.id != id) {
      malformed("reply id " + std::to_string(reply.id) + " does not match request " + std::to_string(id));
    }
    return reply;
  }
}

HelloAck Endpoint::handshake() {
  std::lock_guard lock(mutex_);
  const Message reply = exchange(Hello{});
  if (const auto* err = std::get_if<ErrorReply>(&reply.payload)) {
    fail(ErrorCode::kPredictorFailure, "endpoint refused handshake: " + err->message);
  }
  const auto* ack = std::get_if<HelloAck>(&reply.payload);
  if (!ack) malformed("expected hello_ack, got " + std::string(kind_name(reply.payload)));
  if (!compatible(kProtocolVersion, ack->version)) {
    fail(ErrorCode::kVersionMismatch,
         "endpoint speaks protocol " + ack->version + ", expected " + std::string(kProtocolVersion));
  }
  if (ack->max_k < 1 || ack->capacity < 1) malformed("hello_ack max_k and capacity must be >= 1");
  capabilities_ = *ack;
  return *ack;
}

SampleSet Endpoint::remote_predict(const PredictionQuery& query) {
  std::lock_guard lock(mutex_);
  require(capabilities_.has_value(), ErrorCode::kInvalidArgument, "remote_predict before handshake");
  validate_query(query);
  require(query.k <= capabilities_->max_k, ErrorCode::kInvalidArgument,
          "k = " + std::to_string(query.k) + " exceeds the endpoint's max_k " + std::to_string(capabilities_->max_k));
  const Message reply = exchange(Predict{query});
  if (const auto* err = std::get_if<ErrorReply>(&reply.payload)) {
    fail(ErrorCode::kPredictorFailure, "endpoint error: " + err->message);
  }
  const auto* samples = std::get_if<Samples>(&reply.payload);
  if (!samples) malformed("expected samples, got " + std::string(kind_name(reply.payload)));
  SampleSet out{samples->trajectories, {}};
  validate_prediction(query, out);
  return out;
}

ExternalPredictor::ExternalPredictor(std::string tag, EndpointDescriptor descriptor)
    : Predictor(std::move(tag), CausalClaim::kUnknown), endpoint_(std::make_unique<Endpoint>(std::move(descriptor))) {
  capabilities_ = endpoint_->handshake();
}

SampleSet ExternalPredictor::do_predict(const PredictionQuery& query) const { return endpoint_->remote_predict(query); }

std::shared_ptr<const ExternalPredictor> make_external(EndpointDescriptor descriptor, std::string tag) {
  return std::make_shared<ExternalPredictor>(std::move(tag), std::move(descriptor));
}

bool ProbeReport::conformant() const {
  if (checks.empty()) return false;
  for (const auto& c : checks) {
    if (!c.informational && !c.passed) return false;
  }
  return true;
}

const ProbeCheck* ProbeReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

// Same plan through step `keep`, then a slow constant speed.
RobotPlan late_variant(const RobotPlan& plan, int keep, double late_speed, double dt) {
  RobotPlan out = plan;
  for (std::size_t t = keep + 1; t < out.states.size(); ++t) {
    out.states[t].s = out.states[t - 1].s - dt * out.states[t - 1].v;
    out.states[t].v = late_speed;
  }
  return out;
}

bool same_prefix(const SampleSet& a, const SampleSet& b, int last_step) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int t = 0; t <= last_step; ++t) {
      if (!(a.samples[i][t] == b.samples[i][t])) return false;
    }
  }
  return true;
}

}  // namespace

ProbeReport probe(const EndpointDescriptor& descriptor) {
  ProbeReport report;
  std::unique_ptr<Endpoint> endpoint;
  try {
    endpoint = std::make_unique<Endpoint>(descriptor);
    report.capabilities = endpoint->handshake();
    report.checks.push_back({"handshake", true, false,
                             "protocol " + report.capabilities->version + ", max_k " +
                                 std::to_string(report.capabilities->max_k) + ", capacity " +
                                 std::to_string(report.capabilities->capacity)});
  } catch (const Error& e) {
    report.checks.push_back({"handshake", false, false, e.what()});
    return report;
  }

  constexpr int kPrefix = 4;
  PredictionQuery base;
  base.robot_future = plan_accelerate(base.scenario, 5.0, 10.0);
  base.k = std::min(8, report.capabilities->max_k);
  base.seed = SeedKey{7, 0, 0, SeedRole::kHumanNoise};

  auto ask = [&](const PredictionQuery& q) -> std::optional<SampleSet> {
    try {
      return endpoint->remote_predict(q);
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  std::optional<SampleSet> first;
  try {
    first = endpoint->remote_predict(base);
    report.checks.push_back({"shape", true, false,
                             std::to_string(first->size()) + " trajectories of horizon " +
                                 std::to_string(base.scenario.horizon)});
  } catch (const Error& e) {
    report.checks.push_back({"shape", false, false, e.what()});
    return report;
  }

  const auto repeat = ask(base);
  if (!repeat) {
    report.checks.push_back({"determinism", false, false, "repeated query failed"});
  } else if (*repeat == *first) {
    report.checks.push_back({"determinism", true, false, "repeated query is bit-identical"});
  } else {
    report.checks.push_back(
        {"determinism", false, false, std::string(to_string(ErrorCode::kDeterminismViolation)) +
                                          ": repeated query with the same seed returned different samples"});
  }

  PredictionQuery other_seed = base;
  other_seed.seed.trial = 1;
  const auto other = ask(other_seed);
  const auto again = ask(base);
  if (!other || !again) {
    report.checks.push_back({"seed-honoring", false, false, "query failed"});
  } else {
    const bool restored = *again == *first;
    const std::string varies = *other == *first ? "identical" : "different";
    report.checks.push_back({"seed-honoring", restored, false,
                             (restored ? std::string("answer depends only on the query and seed")
                                       : std::string("answer changed after an unrelated query (hidden state)")) +
                                 "; another seed gives " + varies + " samples"});
  }

  PredictionQuery late = base;
  late.robot_future = late_variant(base.robot_future, kPrefix, 1.0, base.scenario.params.dt);
  const auto late_answer = ask(late);
  if (!late_answer) {
    report.checks.push_back({"prefix-independence", false, true, "query failed"});
  } else if (same_prefix(*first, *late_answer, kPrefix)) {
    report.checks.push_back({"prefix-independence", true, true,
                             "clean: steps 1.." + std::to_string(kPrefix) + " unchanged when only later plan steps differ"});
  } else {
    report.checks.push_back({"prefix-independence", false, true,
                             "difference: steps 1.." + std::to_string(kPrefix) +
                                 " changed when only later plan steps differ (run a full audit)"});
  }
  return report;
}

void serve(std::istream& in, std::ostream& out, const Predictor& predictor, const HelloAck& capabilities) {
  auto send = [&](const Message& m) { out << encode(m) << '\n' << std::flush; };
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Message request;
    try {
      request = decode(line);
    } catch (const Error& e) {
      std::uint64_t id = 0;
      const auto raw = json::parse(line, nullptr, false);
      if (raw.is_object() && raw.contains("id") && raw["id"].is_number_unsigned()) id = raw["id"].get<std::uint64_t>();
      send({id, ErrorReply{e.what()}});
      continue;
    }
    if (const auto* hello = std::get_if<Hello>(&request.payload)) {
      if (!compatible(capabilities.version, hello->version)) {
        send({request.id, ErrorReply{std::string(to_string(ErrorCode::kVersionMismatch)) + ": server speaks " +
                                     capabilities.version}});
      } else {
        send({request.id, capabilities});
      }
    } else if (const auto* predict = std::get_if<Predict>(&request.payload)) {
      try {
        require(predict->query.k <= capabilities.max_k, ErrorCode::kInvalidArgument, "k exceeds max_k");
        auto samples = predictor.predict(predict->query);
        require(samples.uniform(), ErrorCode::kPredictorFailure, "weighted samples cannot be sent");
        send({request.id, Samples{std::move(samples.samples)}});
      } catch (const Error& e) {
        send({request.id, ErrorReply{e.what()}});
      }
    } else if (std::holds_alternative<Shutdown>(request.payload)) {
      return;
    } else {
      send({request.id, ErrorReply{"unexpected message kind '" + std::string(kind_name(request.payload)) + "'"}});
    }
  }
}

}  // namespace ibp::extproto
