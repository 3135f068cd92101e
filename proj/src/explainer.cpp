#include "focus/explainer.hpp"

#include "focus/mosaic.hpp"

#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <regex>

extern char** environ;

namespace fs = std::filesystem;

namespace focus {

std::vector<std::string> split_command(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    bool in_word = false;
    char quote = 0;
    for (char c : text) {
        if (quote) {
            if (c == quote) quote = 0;
            else cur.push_back(c);
        } else if (c == '\'' || c == '"') {
            quote = c;
            in_word = true;
        } else if (c == ' ' || c == '\t' || c == '\n') {
            if (in_word) out.push_back(std::move(cur));
            cur.clear();
            in_word = false;
        } else {
            cur.push_back(c);
            in_word = true;
        }
    }
    if (quote) throw usage_error("unterminated quote in explainer command");
    if (in_word) out.push_back(std::move(cur));
    return out;
}

namespace {

struct Pipe {
    int fd[2] = {-1, -1};
    Pipe() {
        if (::pipe2(fd, O_CLOEXEC) != 0) throw Error(ErrorKind::explainer, std::string("pipe: ") + std::strerror(errno));
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    Pipe(const Pipe&) = delete;
    Pipe& operator=(const Pipe&) = delete;
    void close_read() {
        if (fd[0] >= 0) ::close(fd[0]);
        fd[0] = -1;
    }
    void close_write() {
        if (fd[1] >= 0) ::close(fd[1]);
        fd[1] = -1;
    }
};

std::vector<std::string> child_environment(const std::vector<std::string>& passthrough) {
    std::vector<std::string> env;
    if (passthrough.empty()) {
        for (char** e = environ; *e; ++e) env.emplace_back(*e);
        return env;
    }
    for (const auto& name : passthrough) {
        if (const char* v = std::getenv(name.c_str())) env.push_back(name + "=" + v);
    }
    return env;
}

class ProgressParser {
public:
    void feed(std::string_view chunk) {
        buffer_.append(chunk);
        std::size_t nl;
        while ((nl = buffer_.find('\n')) != std::string::npos) {
            line(buffer_.substr(0, nl));
            buffer_.erase(0, nl + 1);
        }
    }
    void finish() {
        if (!buffer_.empty()) line(buffer_);
        buffer_.clear();
    }
    std::size_t updates() const { return updates_; }

private:
    void line(const std::string& l) {
        static const std::regex progress(R"(PROGRESS (\d+)/(\d+)\r?)");
        std::smatch m;
        if (std::regex_match(l, m, progress)) {
            ++updates_;
            spdlog::debug("explainer progress {}/{}", m[1].str(), m[2].str());
        } else if (!l.empty()) {
            spdlog::warn("explainer wrote a non-protocol stdout line: {}", l);
        }
    }
    std::string buffer_;
    std::size_t updates_ = 0;
};

}  // namespace

ExplainerRun run_explainer(const ExplainerInvocation& invocation, const fs::path& manifest_json, const fs::path& out_dir,
                           unsigned jobs) {
    if (invocation.command.empty()) throw usage_error("explainer command is empty");
    if (invocation.timeout.count() <= 0) throw usage_error("explainer timeout must be positive");
    const auto manifest = load_manifest(manifest_json);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw data_error("cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<std::string> args = invocation.command;
    args.insert(args.end(), {"--manifest", manifest_json.string(), "--output-dir", out_dir.string(),
                             "--target-class-field", "target_class"});
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    auto env_strings = child_environment(invocation.env_passthrough);
    std::vector<char*> envp;
    for (auto& e : env_strings) envp.push_back(e.data());
    envp.push_back(nullptr);

    Pipe out_pipe, err_pipe;
    spdlog::info("running explainer: {}", args.front());
    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorKind::explainer, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out_pipe.fd[1], STDOUT_FILENO);
        ::dup2(err_pipe.fd[1], STDERR_FILENO);
        ::execvpe(argv[0], argv.data(), envp.data());
        const char* what = std::strerror(errno);
        for (const char* part : {"cannot execute ", static_cast<const char*>(argv[0]), ": ", what, "\n"}) {
            [[maybe_unused]] auto n = ::write(STDERR_FILENO, part, std::strlen(part));
        }
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    out_pipe.close_write();
    err_pipe.close_write();

    ProgressParser progress;
    std::string err_tail;
    bool timed_out = false;
    const auto deadline = start + invocation.timeout;
    bool out_open = true, err_open = true;
    char buf[8192];
    while (out_open || err_open) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            timed_out = true;
            ::kill(-pid, SIGKILL);
            break;
        }
        const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        pollfd fds[2] = {{out_open ? out_pipe.fd[0] : -1, POLLIN, 0}, {err_open ? err_pipe.fd[0] : -1, POLLIN, 0}};
        const int rc = ::poll(fds, 2, static_cast<int>(std::min<long long>(wait_ms, 1000)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            ::kill(-pid, SIGKILL);
            throw Error(ErrorKind::explainer, std::string("poll: ") + std::strerror(errno));
        }
        for (int i = 0; i < 2; ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
            if (n <= 0) {
                (i == 0 ? out_open : err_open) = false;
                continue;
            }
            if (i == 0) {
                progress.feed(std::string_view(buf, static_cast<std::size_t>(n)));
            } else {
                err_tail.append(buf, static_cast<std::size_t>(n));
                if (err_tail.size() > 2 * kStderrTailBytes) err_tail.erase(0, err_tail.size() - kStderrTailBytes);
            }
        }
    }
    progress.finish();
    if (err_tail.size() > kStderrTailBytes) err_tail.erase(0, err_tail.size() - kStderrTailBytes);

    // The explainer may close its pipes and keep running; the deadline still applies.
    int status = 0;
    for (;;) {
        const pid_t done = ::waitpid(pid, &status, timed_out ? 0 : WNOHANG);
        if (done == pid) break;
        if (done < 0 && errno != EINTR) throw Error(ErrorKind::explainer, std::string("waitpid: ") + std::strerror(errno));
        if (!timed_out && std::chrono::steady_clock::now() >= deadline) {
            timed_out = true;
            ::kill(-pid, SIGKILL);
            continue;
        }
        if (done == 0) ::usleep(10000);
    }
    ExplainerRun run;
    run.duration = std::chrono::steady_clock::now() - start;
    run.progress_updates = progress.updates();
    run.stderr_tail = err_tail;

    if (timed_out) {
        throw ExplainerError("explainer timed out after " + std::to_string(invocation.timeout.count()) + " ms", -1,
                             err_tail, true);
    }
    if (WIFSIGNALED(status)) {
        throw ExplainerError("explainer failed: killed by signal " + std::to_string(WTERMSIG(status)) + "\n" + err_tail,
                             -1, err_tail, false);
    }
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0) {
        throw ExplainerError("explainer failed with exit code " + std::to_string(code) + "\n" + err_tail, code, err_tail,
                             false);
    }
    run.report = validate_run(manifest, out_dir, jobs);
    spdlog::info("explainer finished in {:.1f}s; {} of {} maps valid", run.duration.count(),
                 run.report.count(MapStatus::valid), run.report.entries.size());
    return run;
}

}  // namespace focus
