#pragma once

#include <atomic>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "decreg/errors.hpp"
#include "decreg/io.hpp"
#include "decreg/scoring.hpp"

namespace decreg {

// Merged-cloud exchange file: one "x y z tag" line per point, tag 0 for
// source and 1 for target.
inline void save_merged_cloud_xyzt(const TaggedMergedCloud& m, const std::filesystem::path& path,
                                   bool with_viewpoints = false) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    if (with_viewpoints && m.source_viewpoint) {
        out << "# viewpoint 0 " << detail::format_coord(m.source_viewpoint->x()) << ' '
            << detail::format_coord(m.source_viewpoint->y()) << ' '
            << detail::format_coord(m.source_viewpoint->z()) << '\n';
    }
    if (with_viewpoints && m.target_viewpoint) {
        out << "# viewpoint 1 " << detail::format_coord(m.target_viewpoint->x()) << ' '
            << detail::format_coord(m.target_viewpoint->y()) << ' '
            << detail::format_coord(m.target_viewpoint->z()) << '\n';
    }
    for (std::size_t i = 0; i < m.points.size(); ++i) {
        const auto& p = m.points[i];
        out << detail::format_coord(p.x()) << ' ' << detail::format_coord(p.y()) << ' '
            << detail::format_coord(p.z()) << ' ' << (m.tags[i] == PointTag::source ? 0 : 1)
            << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline TaggedMergedCloud load_merged_cloud_xyzt(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    TaggedMergedCloud m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string word;
            ss >> word;
            if (word == "viewpoint") {
                int which;
                Vec3 vp;
                if (ss >> which >> vp.x() >> vp.y() >> vp.z()) {
                    (which == 0 ? m.source_viewpoint : m.target_viewpoint) = vp;
                }
            }
            continue;
        }
        std::istringstream ss(line);
        Vec3 p;
        int tag;
        if (!(ss >> p.x() >> p.y() >> p.z() >> tag) || (tag != 0 && tag != 1)) {
            throw IoError(path.string() + ": bad merged-cloud line " + std::to_string(line_no));
        }
        m.points.push_back(p);
        m.tags.push_back(tag == 0 ? PointTag::source : PointTag::target);
    }
    return m;
}

// Child process speaking the line protocol: we send
//   SCORE <path-to-merged-cloud-file> <scale>\n
// and expect one line holding a decimal in [0, 1] back. Anything else,
// including a dead child, raises ExternalScorerError.
class ExternalScorerProcess {
public:
    explicit ExternalScorerProcess(std::vector<std::string> command) : command_(std::move(command)) {
        if (command_.empty()) throw ExternalScorerError("external scorer: empty command");
        spawn();
    }

    ExternalScorerProcess(const ExternalScorerProcess&) = delete;
    ExternalScorerProcess& operator=(const ExternalScorerProcess&) = delete;

    ~ExternalScorerProcess() { shutdown(); }

    double score_file(const std::filesystem::path& cloud_path, double scale) {
        if (child_ < 0) throw ExternalScorerError("external scorer: process not running");
        char request[4096];
        const int len = std::snprintf(request, sizeof(request), "SCORE %s %.17g\n",
                                      cloud_path.c_str(), scale);
        if (len <= 0 || static_cast<std::size_t>(len) >= sizeof(request)) {
            throw ExternalScorerError("external scorer: request too long");
        }
        if (!write_all(request, static_cast<std::size_t>(len))) {
            fail("request write failed (scorer exited?)");
        }
        const std::string reply = read_line();
        char* end = nullptr;
        errno = 0;
        const double value = std::strtod(reply.c_str(), &end);
        if (errno != 0 || end == reply.c_str() || value < 0.0 || value > 1.0 ||
            !std::isfinite(value)) {
            fail("malformed score reply: '" + reply + "'");
        }
        while (end && *end != '\0') {
            if (!std::isspace(static_cast<unsigned char>(*end))) {
                fail("trailing garbage in score reply: '" + reply + "'");
            }
            ++end;
        }
        return value;
    }

private:
    void spawn() {
        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0) {
            throw ExternalScorerError("external scorer: pipe() failed");
        }
        const pid_t pid = fork();
        if (pid < 0) throw ExternalScorerError("external scorer: fork() failed");
        if (pid == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            std::vector<char*> argv;
            argv.reserve(command_.size() + 1);
            for (auto& arg : command_) argv.push_back(arg.data());
            argv.push_back(nullptr);
            execvp(argv[0], argv.data());
            _exit(127);
        }
        child_ = pid;
        stdin_fd_ = to_child[1];
        stdout_fd_ = from_child[0];
        close(to_child[0]);
        close(from_child[1]);
    }

    void shutdown() {
        if (stdin_fd_ >= 0) close(stdin_fd_);
        if (stdout_fd_ >= 0) close(stdout_fd_);
        stdin_fd_ = stdout_fd_ = -1;
        if (child_ > 0) {
            int status = 0;
            waitpid(child_, &status, 0);
            child_ = -1;
        }
    }

    [[noreturn]] void fail(const std::string& why) {
        shutdown();
        throw ExternalScorerError("external scorer: " + why);
    }

    bool write_all(const char* data, std::size_t len) {
        std::size_t sent = 0;
        while (sent < len) {
            const ssize_t n = write(stdin_fd_, data + sent, len - sent);
            if (n <= 0) {
                if (errno == EINTR) continue;
                return false;
            }
            sent += static_cast<std::size_t>(n);
        }
        return true;
    }

    std::string read_line() {
        std::string line;
        char c;
        while (true) {
            const ssize_t n = read(stdout_fd_, &c, 1);
            if (n == 1) {
                if (c == '\n') return line;
                line.push_back(c);
                if (line.size() > 4096) fail("oversized score reply");
            } else if (n == 0) {
                fail("scorer closed its output stream");
            } else if (errno != EINTR) {
                fail("read failed: " + std::string(std::strerror(errno)));
            }
        }
    }

    std::vector<std::string> command_;
    pid_t child_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
};

// ---- scorer interface used by the registration pipeline ----

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double score_merged(const TaggedMergedCloud& m, double scale) const = 0;
};

class ModelScorer final : public Scorer {
public:
    ModelScorer(ScorerModel model, FeatureConfig cfg = {})
        : model_(std::move(model)), cfg_(cfg) {}

    double score_merged(const TaggedMergedCloud& m, double scale) const override {
        return score(model_, m, scale, cfg_);
    }

    const ScorerModel& model() const { return model_; }

private:
    ScorerModel model_;
    FeatureConfig cfg_;
};

// Bridges to a child-process scorer. Each request writes the merged
// cloud to a scratch file and asks the child for one score.
class ExternalScorer final : public Scorer {
public:
    explicit ExternalScorer(std::vector<std::string> command,
                            std::filesystem::path scratch_dir = std::filesystem::temp_directory_path())
        : process_(std::move(command)), scratch_dir_(std::move(scratch_dir)) {}

    double score_merged(const TaggedMergedCloud& m, double scale) const override {
        const std::filesystem::path path =
            scratch_dir_ / ("decreg_score_" + std::to_string(getpid()) + "_" +
                            std::to_string(counter_.fetch_add(1)) + ".xyzt");
        save_merged_cloud_xyzt(m, path);
        struct Cleanup {
            const std::filesystem::path& p;
            ~Cleanup() {
                std::error_code ec;
                std::filesystem::remove(p, ec);
            }
        } cleanup{path};
        return process_.score_file(path, scale);
    }

private:
    mutable ExternalScorerProcess process_;
    std::filesystem::path scratch_dir_;
    mutable std::atomic<std::uint64_t> counter_{0};
};

// Tries the primary scorer, falls back to the secondary on
// ExternalScorerError.
class FallbackScorer final : public Scorer {
public:
    FallbackScorer(const Scorer& primary, const Scorer& fallback)
        : primary_(primary), fallback_(fallback) {}

    double score_merged(const TaggedMergedCloud& m, double scale) const override {
        try {
            return primary_.score_merged(m, scale);
        } catch (const ExternalScorerError&) {
            return fallback_.score_merged(m, scale);
        }
    }

private:
    const Scorer& primary_;
    const Scorer& fallback_;
};

}  // namespace decreg
