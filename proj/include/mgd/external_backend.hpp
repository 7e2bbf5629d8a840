// Copyright 2026 The MGD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Child-process appearance backends. The parent talks to the child over its
// stdin/stdout with one request in flight:
//
//   handshake   parent: "MGD/1 CLS\n" or "MGD/1 DET\n"    child: "OK\n"
//   classify    parent: "CLS <id> 32 32\n" + 1024 bytes   child: "CLS <id> <score>\n"
//   detect      parent: "DET <id> <w> <h>\n" + w*h bytes  child: "DET <id> <n>\n"
//                                                          then n x "<x> <y> <w> <h> <conf>\n"
//
// Any malformed or mismatched reply raises BackendError.

#pragma once

#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mgd/appearance.hpp"
#include "mgd/error.hpp"

namespace mgd {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    const std::size_t j = s.find(' ', i);
    const std::size_t end = j == std::string_view::npos ? s.size() : j;
    if (end > i) out.push_back(s.substr(i, end - i));
    i = end;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// A child process (run through /bin/sh -c) connected by a socket pair to its
/// stdin and stdout.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
      throw BackendError("socketpair failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw BackendError("fork failed");
    }
    if (pid_ == 0) {
      ::close(fds[0]);
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    if (fd_ >= 0) ::close(fd_);
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
  }

  void write_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw BackendError("backend write failed");
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  std::string read_line(std::size_t max_len = 4096) {
    std::string line;
    for (;;) {
      const std::size_t nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      if (buffer_.size() > max_len) throw BackendError("backend reply line too long");
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw BackendError("backend closed the stream");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
};

namespace detail {

inline void handshake(ChildProcess& p, std::string_view role) {
  p.write_all("MGD/1 " + std::string(role) + "\n");
  if (p.read_line() != "OK") throw BackendError("backend handshake rejected");
}

inline std::string frame_request(std::string_view verb, std::uint64_t id, const Frame& crop) {
  std::string msg = std::string(verb) + " " + std::to_string(id) + " " + std::to_string(crop.width()) + " " +
                    std::to_string(crop.height()) + "\n";
  msg.append(reinterpret_cast<const char*>(crop.pixels().data()), crop.pixels().size());
  return msg;
}

}  // namespace detail

class ExternalClassifier final : public Classifier {
 public:
  explicit ExternalClassifier(const std::string& command) : proc_(command) { detail::handshake(proc_, "CLS"); }

  double score(const Frame& crop) override {
    const std::uint64_t id = next_id_++;
    proc_.write_all(detail::frame_request("CLS", id, crop));
    const std::string line = proc_.read_line();
    const auto parts = detail::split_ws(line);
    std::uint64_t rid = 0;
    double s = 0.0;
    if (parts.size() != 3 || parts[0] != "CLS" || !detail::parse_number(parts[1], rid) || rid != id ||
        !detail::parse_number(parts[2], s) || !(s >= 0.0 && s <= 1.0)) {
      throw BackendError("malformed classifier reply: '" + line + "'");
    }
    return s;
  }

 private:
  ChildProcess proc_;
  std::uint64_t next_id_ = 0;
};

class ExternalDetector final : public Detector {
 public:
  explicit ExternalDetector(const std::string& command) : proc_(command) { detail::handshake(proc_, "DET"); }

  std::vector<Detection> detect(const Frame& crop) override {
    const std::uint64_t id = next_id_++;
    proc_.write_all(detail::frame_request("DET", id, crop));
    const std::string head = proc_.read_line();
    const auto parts = detail::split_ws(head);
    std::uint64_t rid = 0;
    std::size_t n = 0;
    if (parts.size() != 3 || parts[0] != "DET" || !detail::parse_number(parts[1], rid) || rid != id ||
        !detail::parse_number(parts[2], n) || n > 100000) {
      throw BackendError("malformed detector reply: '" + head + "'");
    }
    std::vector<Detection> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string line = proc_.read_line();
      const auto f = detail::split_ws(line);
      Detection d;
      d.stage = Stage::kRefined;
      if (f.size() != 5 || !detail::parse_number(f[0], d.box.x) || !detail::parse_number(f[1], d.box.y) ||
          !detail::parse_number(f[2], d.box.w) || !detail::parse_number(f[3], d.box.h) ||
          !detail::parse_number(f[4], d.confidence) || !(d.confidence >= 0.0 && d.confidence <= 1.0) ||
          !(d.box.w > 0.0 && d.box.h > 0.0)) {
        throw BackendError("malformed detection line: '" + line + "'");
      }
      out.push_back(d);
    }
    return out;
  }

 private:
  ChildProcess proc_;
  std::uint64_t next_id_ = 0;
};

/// "passthrough", "linear:<model file>" or "external:<command>".
inline std::unique_ptr<Classifier> make_classifier(const std::string& spec) {
  if (spec == "passthrough") return std::make_unique<PassthroughClassifier>();
  if (spec.starts_with("linear:")) return std::make_unique<LinearClassifier>(LinearClassifier::load(spec.substr(7)));
  if (spec.starts_with("external:")) return std::make_unique<ExternalClassifier>(spec.substr(9));
  throw InvalidInput("unknown classifier backend '" + spec + "'");
}

/// "centroid" or "external:<command>".
inline std::unique_ptr<Detector> make_detector(const std::string& spec) {
  if (spec == "centroid") return std::make_unique<CentroidDetector>();
  if (spec.starts_with("external:")) return std::make_unique<ExternalDetector>(spec.substr(9));
  throw InvalidInput("unknown detector backend '" + spec + "'");
}

}  // namespace mgd
