#include "chimera/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <thread>

#include "chimera/protocol.hpp"

extern char** environ;

namespace chimera {

using Clock = std::chrono::steady_clock;

class ExternalProcessEvaluator::Worker {
public:
    enum class Outcome { Ok, Timeout, Died };

    explicit Worker(const ExternalCommand& command) : command_(&command) {}
    ~Worker() { stop(true); }

    bool alive() const { return pid_ > 0; }

    void start() {
        int to_child[2];
        int from_child[2];
        if (pipe2(to_child, O_CLOEXEC) != 0) throw SpawnFailed(std::string("pipe: ") + std::strerror(errno));
        if (pipe2(from_child, O_CLOEXEC) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw SpawnFailed(std::string("pipe: ") + std::strerror(errno));
        }
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

        std::vector<char*> argv;
        for (const auto& arg : command_->argv) argv.push_back(const_cast<char*>(arg.c_str()));
        argv.push_back(nullptr);

        pid_t pid = -1;
        const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        close(to_child[0]);
        close(from_child[1]);
        if (rc != 0) {
            close(to_child[1]);
            close(from_child[0]);
            throw SpawnFailed("cannot launch '" + command_->argv.front() + "': " + std::strerror(rc));
        }
        pid_ = pid;
        to_child_ = to_child[1];
        from_child_ = from_child[0];
        buffer_.clear();

        std::string line;
        const Outcome outcome = read_line(line, Clock::now() + command_->timeout);
        if (outcome != Outcome::Ok) {
            stop(true);
            throw SpawnFailed("worker '" + command_->argv.front() + "' did not send a hello message");
        }
        int version = 0;
        try {
            version = protocol::parse_hello(line);
        } catch (const ProtocolError& e) {
            stop(true);
            throw SpawnFailed(std::string("bad handshake: ") + e.what());
        }
        if (version != protocol::kVersion) {
            stop(true);
            throw VersionMismatch("worker speaks protocol version " + std::to_string(version) + ", expected " +
                                  std::to_string(protocol::kVersion));
        }
    }

    void stop(bool force) {
        if (to_child_ >= 0) close(to_child_);
        to_child_ = -1;
        if (pid_ > 0) {
            bool reaped = false;
            if (!force) {
                // Closed stdin asks the worker to exit; give it a moment.
                for (int i = 0; i < 20 && !reaped; ++i) {
                    if (waitpid(pid_, nullptr, WNOHANG) == pid_)
                        reaped = true;
                    else
                        std::this_thread::sleep_for(std::chrono::milliseconds(10));
                }
            }
            if (!reaped) {
                kill(pid_, SIGKILL);
                waitpid(pid_, nullptr, 0);
            }
            pid_ = -1;
        }
        if (from_child_ >= 0) close(from_child_);
        from_child_ = -1;
        buffer_.clear();
    }

    Outcome exchange(const std::string& message, std::string& reply) {
        const auto deadline = Clock::now() + command_->timeout;
        const std::string line = message + '\n';
        std::size_t written = 0;
        while (written < line.size()) {
            const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                return Outcome::Died;
            }
            written += static_cast<std::size_t>(n);
        }
        return read_line(reply, deadline);
    }

private:
    Outcome read_line(std::string& out, Clock::time_point deadline) {
        for (;;) {
            if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
                out = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                return Outcome::Ok;
            }
            const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
            if (remaining.count() <= 0) return Outcome::Timeout;
            pollfd pfd{from_child_, POLLIN, 0};
            const int ready = poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1 << 30)));
            if (ready < 0) {
                if (errno == EINTR) continue;
                return Outcome::Died;
            }
            if (ready == 0) return Outcome::Timeout;
            char chunk[4096];
            const ssize_t n = read(from_child_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                return Outcome::Died;
            }
            if (n == 0) return Outcome::Died;
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    const ExternalCommand* command_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

ExternalProcessEvaluator::ExternalProcessEvaluator(ExternalCommand command, std::optional<TrainingBudget> budget)
    : GenomeEvaluator(budget), command_(std::move(command)) {
    if (command_.argv.empty()) throw SpawnFailed("empty worker command");
    if (command_.workers < 1) command_.workers = 1;
    std::signal(SIGPIPE, SIG_IGN);
    for (std::size_t i = 0; i < command_.workers; ++i) {
        workers_.push_back(std::make_unique<Worker>(command_));
        workers_.back()->start();
        idle_.push_back(workers_.back().get());
    }
}

ExternalProcessEvaluator::~ExternalProcessEvaluator() {
    for (auto& w : workers_) w->stop(false);
}

ExternalProcessEvaluator::Worker* ExternalProcessEvaluator::acquire() {
    std::unique_lock lock(mutex_);
    available_.wait(lock, [this] { return !idle_.empty(); });
    Worker* w = idle_.back();
    idle_.pop_back();
    return w;
}

void ExternalProcessEvaluator::release(Worker* worker) {
    {
        std::lock_guard lock(mutex_);
        idle_.push_back(worker);
    }
    available_.notify_one();
}

std::size_t ExternalProcessEvaluator::restarts() const {
    std::lock_guard lock(mutex_);
    return restarts_;
}

std::size_t ExternalProcessEvaluator::protocol_errors() const {
    std::lock_guard lock(mutex_);
    return protocol_errors_;
}

Evaluation ExternalProcessEvaluator::evaluate_request(const EvaluationRequest& request) {
    Evaluation failed;
    failed.request_id = request.request_id;
    failed.status = EvalStatus::TrainFailed;

    Worker* worker = acquire();
    auto restart = [&] {
        worker->stop(true);
        try {
            worker->start();
            std::lock_guard lock(mutex_);
            ++restarts_;
        } catch (const Error&) {
            // left stopped; the next request on this worker tries again
        }
    };

    if (!worker->alive()) {
        restart();
        if (!worker->alive()) {
            release(worker);
            failed.message = "worker could not be restarted";
            return failed;
        }
    }

    std::string reply;
    const auto outcome = worker->exchange(protocol::encode_request(request).dump(), reply);
    if (outcome != Worker::Outcome::Ok) {
        failed.message = outcome == Worker::Outcome::Timeout ? "worker timed out" : "worker exited";
        restart();
        release(worker);
        return failed;
    }
    try {
        Evaluation result = protocol::decode_result(reply);
        if (result.request_id != request.request_id)
            throw ProtocolError("response for request " + std::to_string(result.request_id) + " while waiting for " +
                                std::to_string(request.request_id));
        release(worker);
        return result;
    } catch (const ProtocolError& e) {
        {
            std::lock_guard lock(mutex_);
            ++protocol_errors_;
        }
        failed.message = std::string("protocol error: ") + e.what();
        restart();
        release(worker);
        return failed;
    }
}

}  // namespace chimera
