#include "chimera/cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "chimera/config.hpp"
#include "chimera/errors.hpp"
#include "chimera/genome_search.hpp"

namespace chimera::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

// Keeps the first `keep` lines of a text file (no-op when it is shorter or missing).
void truncate_lines(const fs::path& path, std::size_t keep) {
    if (!fs::exists(path)) return;
    std::ifstream in(path);
    std::string line, kept;
    for (std::size_t n = 0; n < keep && std::getline(in, line); ++n) kept += line + '\n';
    in.close();
    write_atomic(path, kept);
}

void report_error(const std::exception& e, const fs::path* run_dir, std::ostream& log) {
    json record{{"error", "error"}, {"message", e.what()}};
    if (const auto* err = dynamic_cast<const Error*>(&e)) record["error"] = err->kind();
    if (const auto* cfg = dynamic_cast<const ConfigError*>(&e)) record["field"] = cfg->field();
    log << record.dump() << '\n';
    if (run_dir && fs::is_directory(*run_dir)) {
        try {
            write_atomic(*run_dir / kErrorFile, record.dump(2) + "\n");
        } catch (...) {
        }
    }
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
    if (dynamic_cast<const VersionMismatch*>(&e) || dynamic_cast<const CorruptSnapshot*>(&e)) return kSnapshotError;
    return kRuntimeError;
}

json eval_record_json(const EvalRecord& r) {
    json j{{"request_id", r.request_id},
           {"iteration", r.iteration},
           {"phase", to_string(r.phase)},
           {"slot", r.slot},
           {"fingerprint", hex64(r.fingerprint)},
           {"status", to_string(r.result.status)},
           {"train_loss", r.result.train_loss},
           {"wall_seconds", r.result.wall_seconds},
           {"accepted", r.accepted}};
    if (r.result.ok()) j["val_loss"] = r.result.val_loss;
    if (r.result.chosen_lr) j["chosen_lr"] = *r.result.chosen_lr;
    if (!r.result.message.empty()) j["message"] = r.result.message;
    return j;
}

std::string iterations_header() { return "iteration,best_loss,mean_loss,archive_size,evals_total\n"; }

std::string iteration_row(const IterationRecord& r) {
    return std::to_string(r.iteration) + "," + number(r.best_loss) + "," + number(r.mean_loss) + "," +
           std::to_string(r.archive_size) + "," + std::to_string(r.evals_total) + "\n";
}

void apply_overrides(RunConfig& cfg, const RunOptions& options) {
    if (options.seed) cfg.engine.rng_seed = *options.seed;
    if (options.evaluator) cfg.evaluator.kind = *options.evaluator;
    if (options.workers) cfg.engine.parallel_evals = *options.workers;
    validate(cfg);
}

class RunDirectory {
public:
    RunDirectory(fs::path dir, const RunConfig& config) : dir_(std::move(dir)), config_(config) {}

    const fs::path& path() const { return dir_; }

    void write_manifest(const std::string& status, const json& previous = nullptr) {
        json m = previous.is_object() ? previous : json::object();
        if (!m.contains("started_at")) m["started_at"] = utc_now();
        m["engine_version"] = kEngineVersion;
        m["rng_seed"] = config_.engine.rng_seed;
        m["config_fnv1a64"] = hex64(fnv1a(to_json(config_).dump()));
        m["status"] = status;
        m["finished_at"] = status == "running" ? json(nullptr) : json(utc_now());
        json artifacts = json::object();
        for (const char* name :
             {kConfigFile, kEvaluationsFile, kIterationsFile, kCheckpointFile, kFinalModelsFile}) {
            const fs::path p = dir_ / name;
            json entry{{"path", name}};
            if (status != "running" && fs::exists(p)) entry["fnv1a64"] = hex64(fnv1a(read_file(p)));
            artifacts[name] = entry;
        }
        m["artifacts"] = artifacts;
        write_atomic(dir_ / kManifestFile, m.dump(2) + "\n");
    }

    json read_manifest() const {
        try {
            return json::parse(read_file(dir_ / kManifestFile));
        } catch (...) {
            return nullptr;
        }
    }

private:
    fs::path dir_;
    const RunConfig& config_;
};

json snapshot(const GenomeColony& colony, const GenomeColony::state_type& state, const RunConfig& cfg) {
    json j = colony.checkpoint(state);
    j["config"] = to_json(cfg);
    return j;
}

// Drives a colony from `state` (already initialized or restored) to completion or halt.
int drive(const RunConfig& cfg, const fs::path& dir, std::optional<GenomeColony::state_type> restored,
          const RunOptions& options, std::ostream& log) {
    RunDirectory run(dir, cfg);
    const json previous = run.read_manifest();
    run.write_manifest("running", restored ? previous : json(nullptr));

    EvaluatorStack stack(cfg);
    GenomeColony colony(cfg.engine, GenomeSpace(cfg.bounds, cfg.mutation), stack.evaluator(), cfg.seed_genome);

    std::ofstream evals(dir / kEvaluationsFile, std::ios::app);
    std::ofstream iters(dir / kIterationsFile, std::ios::app);
    colony.on_evaluation([&](const EvalRecord& r) { evals << eval_record_json(r).dump() << '\n'; });
    colony.on_iteration([&](const GenomeColony::state_type& state, const IterationRecord& r) {
        iters << iteration_row(r);
        iters.flush();
        evals.flush();
        if (state.iteration % cfg.checkpoint_every == 0)
            write_atomic(dir / kCheckpointFile, snapshot(colony, state, cfg).dump() + "\n");
        if (!options.quiet)
            log << "iteration " << r.iteration << "/" << cfg.engine.max_iter << "  best " << number(r.best_loss)
                << "  mean " << number(r.mean_loss) << "  archive " << r.archive_size << "  evals "
                << r.evals_total << '\n';
    });

    GenomeColony::state_type state;
    if (restored) {
        state = std::move(*restored);
    } else {
        iters << iterations_header();
        state = colony.initialize();
        evals.flush();
        iters.flush();
        write_atomic(dir / kCheckpointFile, snapshot(colony, state, cfg).dump() + "\n");
    }

    std::uint64_t session = 0;
    bool halted = false;
    while (!colony.should_stop(state)) {
        if (options.halt_after && session >= *options.halt_after) {
            halted = true;
            break;
        }
        GenomeColony::state_type boundary = state;
        try {
            colony.step(state);
        } catch (...) {
            evals.flush();
            write_atomic(dir / kCheckpointFile, snapshot(colony, boundary, cfg).dump() + "\n");
            run.write_manifest("aborted", run.read_manifest());
            throw;
        }
        ++session;
    }
    evals.flush();
    iters.flush();
    write_atomic(dir / kCheckpointFile, snapshot(colony, state, cfg).dump() + "\n");

    if (halted) {
        run.write_manifest("halted", run.read_manifest());
        if (!options.quiet) log << "halted at iteration " << state.iteration << "; resume from " << (dir / kCheckpointFile).string() << '\n';
        return kOk;
    }

    json models = json::array();
    std::size_t rank = 1;
    for (const auto& c : colony.final_models(state)) {
        json entry{{"rank", rank++},
                   {"loss", c.loss},
                   {"fitness", c.fitness},
                   {"fingerprint", hex64(genome_fingerprint(c.genome))},
                   {"genome", to_json(c.genome)}};
        if (c.chosen_lr) entry["chosen_lr"] = *c.chosen_lr;
        models.push_back(std::move(entry));
    }
    write_atomic(dir / kFinalModelsFile, models.dump(2) + "\n");
    run.write_manifest("completed", run.read_manifest());
    if (!options.quiet) {
        log << "completed: " << models.size() << " final models, best loss " << number(models.at(0).at("loss").get<double>());
        if (const auto* cache = stack.cache()) log << ", cache hits " << cache->hits() << " misses " << cache->misses();
        log << '\n';
    }
    return kOk;
}

}  // namespace

std::optional<std::size_t> workers_from_env() {
    const char* value = std::getenv("CHIMERA_WORKERS");
    if (!value || !*value) return std::nullopt;
    char* end = nullptr;
    const long long n = std::strtoll(value, &end, 10);
    if (*end != '\0' || n < 1) throw ConfigError("CHIMERA_WORKERS", "must be a positive integer");
    return static_cast<std::size_t>(n);
}

int cmd_run(const fs::path& config_path, const fs::path& out_dir, const RunOptions& options, std::ostream& log) {
    try {
        fs::create_directories(out_dir);
        RunConfig cfg = load_run_config(config_path);
        apply_overrides(cfg, options);
        // A fresh run owns the directory; stale artifacts from an earlier run would corrupt telemetry.
        for (const char* name : {kEvaluationsFile, kIterationsFile, kCheckpointFile, kFinalModelsFile, kErrorFile})
            fs::remove(out_dir / name);
        write_atomic(out_dir / kConfigFile, to_json(cfg).dump(2) + "\n");
        return drive(cfg, out_dir, std::nullopt, options, log);
    } catch (const std::exception& e) {
        report_error(e, &out_dir, log);
        return exit_code_for(e);
    }
}

int cmd_resume(const fs::path& checkpoint_path, const RunOptions& options, std::ostream& log) {
    const fs::path dir = checkpoint_path.parent_path().empty() ? fs::path(".") : checkpoint_path.parent_path();
    try {
        json snap;
        try {
            snap = json::parse(read_file(checkpoint_path));
        } catch (const json::parse_error& e) {
            throw CorruptSnapshot(std::string("unreadable checkpoint: ") + e.what());
        }
        if (!snap.is_object() || !snap.contains("config")) throw CorruptSnapshot("checkpoint has no config");
        if (!snap.contains("version") || snap.at("version") != kCheckpointVersion)
            throw VersionMismatch("checkpoint version " + snap.value("version", json(nullptr)).dump() +
                                  " is not supported");
        RunConfig cfg;
        try {
            cfg = parse_run_config(snap.at("config"));
        } catch (const ConfigError& e) {
            throw CorruptSnapshot(std::string("checkpoint config: ") + e.what());
        }
        if (options.workers) cfg.engine.parallel_evals = *options.workers;

        GenomeSpace space(cfg.bounds, cfg.mutation);
        ConstantEvaluator unused(0.0);
        GenomeColony reader(cfg.engine, space, unused);
        auto state = reader.restore(snap);

        truncate_lines(dir / kEvaluationsFile, state.evals_total);
        truncate_lines(dir / kIterationsFile, state.history.size() + 1);
        fs::remove(dir / kFinalModelsFile);
        fs::remove(dir / kErrorFile);
        return drive(cfg, dir, std::move(state), options, log);
    } catch (const std::exception& e) {
        report_error(e, &dir, log);
        return exit_code_for(e);
    }
}

int cmd_export(const fs::path& run_dir, const std::string& format, std::ostream& out, std::ostream& log) {
    try {
        if (format != "csv") throw ConfigError("format", "only csv is supported");
        const fs::path path = run_dir / kCheckpointFile;
        if (!fs::exists(path)) throw MissingArtifact("no checkpoint in " + run_dir.string());
        json snap;
        try {
            snap = json::parse(read_file(path));
        } catch (const json::parse_error& e) {
            throw CorruptSnapshot(std::string("unreadable checkpoint: ") + e.what());
        }
        if (!snap.contains("history") || !snap.at("history").is_array())
            throw CorruptSnapshot("checkpoint has no iteration history");
        const auto& history = snap.at("history");
        if (history.empty()) throw MissingArtifact("no completed iterations to export");
        out << iterations_header();
        for (const auto& h : history) out << iteration_row(GenomeColony::iteration_from_json(h));
        return kOk;
    } catch (const std::exception& e) {
        report_error(e, nullptr, log);
        return exit_code_for(e);
    }
}

int cmd_validate_config(const fs::path& config_path, std::ostream& out, std::ostream& log) {
    try {
        const RunConfig cfg = load_run_config(config_path);
        out << to_json(cfg).dump(2) << '\n';
        return kOk;
    } catch (const std::exception& e) {
        report_error(e, nullptr, log);
        return exit_code_for(e);
    }
}

int cmd_print_genome(const fs::path& path, std::size_t index, std::ostream& out, std::ostream& log) {
    try {
        json doc;
        try {
            doc = json::parse(read_file(path));
        } catch (const json::parse_error& e) {
            throw SchemaError(std::string("not valid JSON: ") + e.what());
        }
        const json* record = &doc;
        if (doc.is_array()) {
            if (index >= doc.size()) throw SchemaError("index out of range");
            record = &doc.at(index);
        } else if (doc.is_object() && doc.contains("candidates")) {
            if (index >= doc.at("candidates").size()) throw SchemaError("index out of range");
            record = &doc.at("candidates").at(index);
        }
        if (record->is_object() && record->contains("genome")) record = &record->at("genome");
        out << describe(genome_from_json(*record));
        return kOk;
    } catch (const std::exception& e) {
        report_error(e, nullptr, log);
        return exit_code_for(e);
    }
}

}  // namespace chimera::cli
