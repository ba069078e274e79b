#include "fedsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed streams, so data sampling, initialization and splits never consume
// the same portion of the generator: 1 = dataset, 2 = theta0, 100+k =
// client k's train/eval split.
constexpr std::uint64_t kStreamDataset = 1;
constexpr std::uint64_t kStreamInit = 2;
constexpr std::uint64_t kStreamSplitBase = 100;

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    // Matches Rng::derive's mixing; kept as a number so non-Rng consumers
    // (init_params) get the same value.
    std::uint64_t x = stream;
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return seed ^ (z ^ (z >> 31));
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Parsing

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& path, std::vector<std::string>& errors) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) {
            ok = ok || it.key() == a;
        }
        if (!ok) {
            errors.push_back(path + ": unknown field '" + it.key() + "'");
        }
    }
}

bool expect_object(const json& j, const std::string& path, std::vector<std::string>& errors) {
    if (!j.is_object()) {
        errors.push_back(path + ": expected an object");
        return false;
    }
    return true;
}

std::optional<int> get_int(const json& j, const char* key, const std::string& path,
                           std::vector<std::string>& errors, bool required) {
    if (!j.contains(key)) {
        if (required) {
            errors.push_back(path + "." + key + ": missing required field");
        }
        return std::nullopt;
    }
    if (!j.at(key).is_number_integer()) {
        errors.push_back(path + "." + key + ": expected an integer");
        return std::nullopt;
    }
    return j.at(key).get<int>();
}

std::optional<double> get_double(const json& j, const char* key, const std::string& path,
                                 std::vector<std::string>& errors, bool required) {
    if (!j.contains(key)) {
        if (required) {
            errors.push_back(path + "." + key + ": missing required field");
        }
        return std::nullopt;
    }
    if (!j.at(key).is_number()) {
        errors.push_back(path + "." + key + ": expected a number");
        return std::nullopt;
    }
    return j.at(key).get<double>();
}

std::optional<std::string> get_string(const json& j, const char* key, const std::string& path,
                                      std::vector<std::string>& errors, bool required) {
    if (!j.contains(key)) {
        if (required) {
            errors.push_back(path + "." + key + ": missing required field");
        }
        return std::nullopt;
    }
    if (!j.at(key).is_string()) {
        errors.push_back(path + "." + key + ": expected a string");
        return std::nullopt;
    }
    return j.at(key).get<std::string>();
}

std::optional<int> parse_client_key(const std::string& key, const std::string& path,
                                    std::vector<std::string>& errors) {
    try {
        std::size_t pos = 0;
        int id = std::stoi(key, &pos);
        if (pos == key.size() && id >= 1) {
            return id;
        }
    } catch (const std::exception&) {
    }
    errors.push_back(path + ": '" + key + "' is not a valid client id");
    return std::nullopt;
}

void parse_model(const json& j, ModelSpec& model, std::vector<std::string>& errors) {
    if (!expect_object(j, "model", errors)) {
        return;
    }
    check_keys(j, {"kind", "input_dim", "hidden_dim", "num_classes", "activation"}, "model",
               errors);
    auto kind = get_string(j, "kind", "model", errors, true);
    if (kind) {
        if (*kind == "linear_softmax") {
            model.kind = ModelKind::linear_softmax;
        } else if (*kind == "mlp1") {
            model.kind = ModelKind::mlp1;
        } else {
            errors.push_back("model.kind: must be 'linear_softmax' or 'mlp1'");
        }
    }
    model.input_dim = get_int(j, "input_dim", "model", errors, true).value_or(0);
    model.num_classes = get_int(j, "num_classes", "model", errors, true).value_or(0);
    model.hidden_dim = get_int(j, "hidden_dim", "model", errors, false).value_or(0);
    if (auto act = get_string(j, "activation", "model", errors, false)) {
        if (*act == "tanh") {
            model.activation = Activation::tanh;
        } else if (*act == "relu") {
            model.activation = Activation::relu;
        } else {
            errors.push_back("model.activation: must be 'tanh' or 'relu'");
        }
    }
}

void parse_dataset(const json& j, const ModelSpec& model, DatasetConfig& ds,
                   std::vector<std::string>& errors) {
    if (!expect_object(j, "dataset", errors)) {
        return;
    }
    auto type = get_string(j, "type", "dataset", errors, true);
    if (type && *type == "idx") {
        ds.type = DatasetConfig::Type::idx;
        check_keys(j, {"type", "images", "labels", "limit"}, "dataset", errors);
        ds.images = get_string(j, "images", "dataset", errors, true).value_or("");
        ds.labels = get_string(j, "labels", "dataset", errors, true).value_or("");
        ds.limit = get_int(j, "limit", "dataset", errors, true).value_or(0);
        if (ds.limit < 1) {
            errors.push_back("dataset.limit: must be >= 1");
        }
        return;
    }
    if (type && *type != "blobs") {
        errors.push_back("dataset.type: must be 'blobs' or 'idx'");
        return;
    }
    ds.type = DatasetConfig::Type::blobs;
    check_keys(j, {"type", "num_classes", "dim", "per_class", "sigma"}, "dataset", errors);
    ds.num_classes = get_int(j, "num_classes", "dataset", errors, false)
                         .value_or(model.num_classes);
    ds.dim = get_int(j, "dim", "dataset", errors, false).value_or(model.input_dim);
    ds.per_class = get_int(j, "per_class", "dataset", errors, false).value_or(50);
    ds.sigma = get_double(j, "sigma", "dataset", errors, false).value_or(0.5);
}

void parse_partition(const json& j, PartitionPlan& plan, std::vector<std::string>& errors) {
    if (!expect_object(j, "partition", errors)) {
        return;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto id = parse_client_key(it.key(), "partition", errors);
        if (!id) {
            continue;
        }
        if (!it.value().is_array()) {
            errors.push_back("partition." + it.key() + ": expected an array of labels");
            continue;
        }
        std::set<int> labels;
        for (const auto& l : it.value()) {
            if (!l.is_number_integer() || l.get<int>() < 0) {
                errors.push_back("partition." + it.key() + ": labels must be non-negative integers");
                continue;
            }
            labels.insert(l.get<int>());
        }
        plan.assignments[*id] = std::move(labels);
    }
}

void parse_roles(const json& j, std::map<int, RoleSpec>& roles,
                 std::vector<std::string>& errors) {
    if (!expect_object(j, "roles", errors)) {
        return;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto id = parse_client_key(it.key(), "roles", errors);
        if (!id) {
            continue;
        }
        const std::string path = "roles." + it.key();
        const json& rj = it.value();
        if (!expect_object(rj, path, errors)) {
            continue;
        }
        RoleSpec role;
        auto kind = get_string(rj, "kind", path, errors, true);
        if (!kind) {
            continue;
        }
        if (*kind == "honest") {
            check_keys(rj, {"kind"}, path, errors);
            role.kind = RoleSpec::Kind::honest;
        } else if (*kind == "dictator") {
            check_keys(rj, {"kind"}, path, errors);
            role.kind = RoleSpec::Kind::dictator;
        } else if (*kind == "coalition") {
            check_keys(rj, {"kind", "members"}, path, errors);
            role.kind = RoleSpec::Kind::coalition;
            if (!rj.contains("members") || !rj.at("members").is_array()) {
                errors.push_back(path + ".members: required array of client ids");
            } else {
                for (const auto& m : rj.at("members")) {
                    if (!m.is_number_integer()) {
                        errors.push_back(path + ".members: entries must be integers");
                    } else {
                        role.members.push_back(m.get<int>());
                    }
                }
                std::sort(role.members.begin(), role.members.end());
            }
        } else if (*kind == "cheater") {
            check_keys(rj, {"kind", "partner", "betrayal_round"}, path, errors);
            role.kind = RoleSpec::Kind::cheater;
            role.partner = get_int(rj, "partner", path, errors, true).value_or(0);
            role.betrayal_round = get_int(rj, "betrayal_round", path, errors, true).value_or(0);
        } else if (*kind == "probe") {
            check_keys(rj, {"kind", "magnitude", "magnitude_scale"}, path, errors);
            role.kind = RoleSpec::Kind::probe;
            role.probe_magnitude = get_double(rj, "magnitude", path, errors, false).value_or(0.0);
            role.probe_magnitude_scale =
                get_double(rj, "magnitude_scale", path, errors, false).value_or(0.0);
            bool abs_set = role.probe_magnitude > 0.0;
            bool rel_set = role.probe_magnitude_scale > 0.0;
            if (abs_set == rel_set) {
                errors.push_back(path + ": exactly one of magnitude / magnitude_scale must be positive");
            }
        } else {
            errors.push_back(path + ".kind: unknown role '" + *kind + "'");
            continue;
        }
        roles[*id] = std::move(role);
    }
}

// Role/scenario consistency; mutates roles to materialize the implied ones
// (all-dictator for mutual domination, the cheater's partner coalition).
void validate_roles(ScenarioConfig& cfg, std::vector<std::string>& errors) {
    const int n = cfg.protocol.num_clients;
    for (const auto& [id, role] : cfg.roles) {
        if (id < 1 || id > n) {
            errors.push_back("roles." + std::to_string(id) + ": client outside 1.." +
                             std::to_string(n));
            return;
        }
        for (int m : role.members) {
            if (m < 1 || m > n) {
                errors.push_back("roles." + std::to_string(id) + ".members: client " +
                                 std::to_string(m) + " outside 1.." + std::to_string(n));
                return;
            }
        }
    }

    auto non_honest = [&](RoleSpec::Kind kind) {
        std::vector<int> ids;
        for (const auto& [id, role] : cfg.roles) {
            if (role.kind == kind) {
                ids.push_back(id);
            }
        }
        return ids;
    };
    auto count_non_honest = [&]() {
        int c = 0;
        for (const auto& [id, role] : cfg.roles) {
            c += role.kind != RoleSpec::Kind::honest ? 1 : 0;
        }
        return c;
    };

    switch (cfg.kind) {
        case ScenarioKind::regular: {
            if (count_non_honest() != 0) {
                errors.push_back("roles: regular scenario allows only honest roles");
            }
            break;
        }
        case ScenarioKind::single_dictator: {
            auto dictators = non_honest(RoleSpec::Kind::dictator);
            auto probes = non_honest(RoleSpec::Kind::probe);
            if (dictators.size() + probes.size() != 1 ||
                static_cast<int>(dictators.size() + probes.size()) != count_non_honest()) {
                errors.push_back(
                    "roles: single_dictator scenario needs exactly one dictator or probe role");
            }
            break;
        }
        case ScenarioKind::coalition: {
            auto members = non_honest(RoleSpec::Kind::coalition);
            if (members.empty() || static_cast<int>(members.size()) != count_non_honest()) {
                errors.push_back("roles: coalition scenario allows only coalition roles");
                break;
            }
            std::vector<int> declared = cfg.roles.at(members.front()).members;
            for (int id : members) {
                if (cfg.roles.at(id).members != declared) {
                    errors.push_back("roles: coalition members must declare identical member lists");
                    return;
                }
            }
            if (declared != members) {
                // Allow declaring a subset of the member roles; fill the rest.
                for (int id : declared) {
                    if (id < 1 || id > n) {
                        return;  // already reported above
                    }
                    auto it = cfg.roles.find(id);
                    if (it != cfg.roles.end() && it->second.kind != RoleSpec::Kind::coalition) {
                        errors.push_back("roles." + std::to_string(id) +
                                         ": conflicts with coalition membership");
                        return;
                    }
                    RoleSpec role;
                    role.kind = RoleSpec::Kind::coalition;
                    role.members = declared;
                    cfg.roles[id] = std::move(role);
                }
                for (int id : members) {
                    if (std::find(declared.begin(), declared.end(), id) == declared.end()) {
                        errors.push_back("roles." + std::to_string(id) +
                                         ": coalition role not in the declared member list");
                        return;
                    }
                }
            }
            CoalitionSpec spec{declared};
            try {
                spec.validate(n);
            } catch (const std::exception& e) {
                errors.push_back(std::string("roles: ") + e.what());
            }
            break;
        }
        case ScenarioKind::mutual_domination: {
            if (cfg.protocol.rounds < 2) {
                errors.push_back("protocol.rounds: mutual_domination needs >= 2 rounds");
            }
            for (const auto& [id, role] : cfg.roles) {
                if (role.kind != RoleSpec::Kind::dictator) {
                    errors.push_back("roles." + std::to_string(id) +
                                     ": mutual_domination forces all-dictator roles");
                    return;
                }
            }
            for (int id = 1; id <= n; ++id) {
                RoleSpec role;
                role.kind = RoleSpec::Kind::dictator;
                cfg.roles[id] = role;
            }
            break;
        }
        case ScenarioKind::betrayal: {
            auto cheaters = non_honest(RoleSpec::Kind::cheater);
            if (cheaters.size() != 1) {
                errors.push_back("roles: betrayal scenario needs exactly one cheater");
                return;
            }
            int cheater = cheaters.front();
            RoleSpec& role = cfg.roles.at(cheater);
            if (role.partner < 1 || role.partner > n || role.partner == cheater) {
                errors.push_back("roles." + std::to_string(cheater) +
                                 ".partner: must name another client in 1.." + std::to_string(n));
                return;
            }
            if (role.betrayal_round < 2) {
                errors.push_back("roles." + std::to_string(cheater) +
                                 ".betrayal_round: must be >= 2 (a round-1 betrayal sends a zero "
                                 "accumulator)");
            }
            if (role.betrayal_round >= cfg.protocol.rounds) {
                errors.push_back("roles." + std::to_string(cheater) +
                                 ".betrayal_round: must be < protocol.rounds so the betrayed "
                                 "round is executed");
            }
            std::vector<int> pair = {std::min(cheater, role.partner),
                                     std::max(cheater, role.partner)};
            auto it = cfg.roles.find(role.partner);
            if (it == cfg.roles.end()) {
                RoleSpec partner_role;
                partner_role.kind = RoleSpec::Kind::coalition;
                partner_role.members = pair;
                cfg.roles[role.partner] = std::move(partner_role);
            } else if (it->second.kind != RoleSpec::Kind::coalition || it->second.members != pair) {
                errors.push_back("roles." + std::to_string(role.partner) +
                                 ": cheater's partner must hold the two-member coalition role");
            }
            for (const auto& [id, r] : cfg.roles) {
                if (id != cheater && id != role.partner && r.kind != RoleSpec::Kind::honest) {
                    errors.push_back("roles." + std::to_string(id) +
                                     ": betrayal scenario allows no other attack roles");
                }
            }
            if (n < 3) {
                errors.push_back("protocol.num_clients: betrayal needs at least one outsider");
            }
            break;
        }
    }
}

}  // namespace

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::regular: return "regular";
        case ScenarioKind::single_dictator: return "single_dictator";
        case ScenarioKind::coalition: return "coalition";
        case ScenarioKind::mutual_domination: return "mutual_domination";
        case ScenarioKind::betrayal: return "betrayal";
    }
    return "unknown";
}

ConfigParse parse_config_json(const json& j) {
    ConfigParse out;
    auto& errors = out.errors;
    if (!j.is_object()) {
        errors.push_back("config: expected a JSON object");
        return out;
    }
    check_keys(j,
               {"schema_version", "name", "scenario", "seed", "seeds", "model", "dataset",
                "partition", "protocol", "roles", "outputs"},
               "config", errors);

    ScenarioConfig cfg;
    auto version = get_int(j, "schema_version", "config", errors, true);
    if (version && *version != kSchemaVersion) {
        errors.push_back("config.schema_version: expected " + std::to_string(kSchemaVersion));
    }
    cfg.name = get_string(j, "name", "config", errors, true).value_or("");
    if (cfg.name.empty()) {
        errors.push_back("config.name: must be non-empty");
    }

    if (auto kind = get_string(j, "scenario", "config", errors, true)) {
        if (*kind == "regular") {
            cfg.kind = ScenarioKind::regular;
        } else if (*kind == "single_dictator") {
            cfg.kind = ScenarioKind::single_dictator;
        } else if (*kind == "coalition") {
            cfg.kind = ScenarioKind::coalition;
        } else if (*kind == "mutual_domination") {
            cfg.kind = ScenarioKind::mutual_domination;
        } else if (*kind == "betrayal") {
            cfg.kind = ScenarioKind::betrayal;
        } else {
            errors.push_back("config.scenario: unknown scenario '" + *kind + "'");
        }
    }

    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer() || j.at("seed").get<std::int64_t>() < 0) {
            errors.push_back("config.seed: expected a non-negative integer");
        } else {
            cfg.seed = j.at("seed").get<std::uint64_t>();
        }
    }
    if (j.contains("seeds")) {
        if (!j.at("seeds").is_array() || j.at("seeds").empty()) {
            errors.push_back("config.seeds: expected a non-empty array of integers");
        } else {
            for (const auto& s : j.at("seeds")) {
                if (!s.is_number_integer() || s.get<std::int64_t>() < 0) {
                    errors.push_back("config.seeds: entries must be non-negative integers");
                    break;
                }
                cfg.seeds.push_back(s.get<std::uint64_t>());
            }
        }
    }

    if (j.contains("model")) {
        parse_model(j.at("model"), cfg.model, errors);
    } else {
        errors.push_back("config.model: missing required field");
    }
    try {
        cfg.model.validate();
    } catch (const std::exception& e) {
        errors.push_back(std::string("model: ") + e.what());
    }

    if (j.contains("protocol")) {
        const json& pj = j.at("protocol");
        if (expect_object(pj, "protocol", errors)) {
            check_keys(pj, {"eta", "rounds", "num_clients"}, "protocol", errors);
            cfg.protocol.eta = get_double(pj, "eta", "protocol", errors, true).value_or(0.0);
            cfg.protocol.rounds = get_int(pj, "rounds", "protocol", errors, true).value_or(0);
            cfg.protocol.num_clients =
                get_int(pj, "num_clients", "protocol", errors, true).value_or(0);
        }
    } else {
        errors.push_back("config.protocol: missing required field");
    }
    try {
        cfg.protocol.validate();
    } catch (const std::exception& e) {
        errors.push_back(std::string("protocol: ") + e.what());
    }

    if (j.contains("dataset")) {
        parse_dataset(j.at("dataset"), cfg.model, cfg.dataset, errors);
    } else {
        cfg.dataset.type = DatasetConfig::Type::blobs;
        cfg.dataset.num_classes = cfg.model.num_classes;
        cfg.dataset.dim = cfg.model.input_dim;
    }
    if (cfg.dataset.type == DatasetConfig::Type::blobs) {
        if (cfg.dataset.num_classes != cfg.model.num_classes) {
            errors.push_back("dataset.num_classes: must match model.num_classes");
        }
        if (cfg.dataset.dim != cfg.model.input_dim) {
            errors.push_back("dataset.dim: must match model.input_dim");
        }
        if (cfg.dataset.per_class < 1) {
            errors.push_back("dataset.per_class: must be >= 1");
        }
        if (!(cfg.dataset.sigma > 0.0)) {
            errors.push_back("dataset.sigma: must be positive");
        }
    }

    if (j.contains("partition")) {
        parse_partition(j.at("partition"), cfg.partition, errors);
    } else if (cfg.protocol.num_clients >= 2 && cfg.model.num_classes >= cfg.protocol.num_clients) {
        cfg.partition = PartitionPlan::contiguous(cfg.model.num_classes, cfg.protocol.num_clients);
    } else {
        errors.push_back("config.partition: missing and no contiguous default fits");
    }
    if (cfg.protocol.num_clients >= 2) {
        for (int id = 1; id <= cfg.protocol.num_clients; ++id) {
            if (cfg.partition.assignments.find(id) == cfg.partition.assignments.end()) {
                errors.push_back("partition: no label set for client " + std::to_string(id));
            }
        }
        for (const auto& [id, labels] : cfg.partition.assignments) {
            if (id > cfg.protocol.num_clients) {
                errors.push_back("partition." + std::to_string(id) + ": client outside 1.." +
                                 std::to_string(cfg.protocol.num_clients));
            }
            for (int l : labels) {
                if (l >= cfg.model.num_classes) {
                    errors.push_back("partition." + std::to_string(id) + ": label " +
                                     std::to_string(l) + " >= num_classes");
                }
            }
        }
        try {
            cfg.partition.validate();
        } catch (const std::exception& e) {
            errors.push_back(std::string("partition: ") + e.what());
        }
    }

    if (j.contains("roles")) {
        parse_roles(j.at("roles"), cfg.roles, errors);
    }
    if (errors.empty()) {
        validate_roles(cfg, errors);
    }

    cfg.outputs = get_string(j, "outputs", "config", errors, false).value_or("out/" + cfg.name);

    if (errors.empty()) {
        out.config = std::move(cfg);
    }
    return out;
}

ConfigParse parse_config(const std::string& path) {
    ConfigParse out;
    std::ifstream f(path);
    if (!f) {
        out.errors.push_back("config: cannot open '" + path + "'");
        return out;
    }
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        out.errors.push_back(std::string("config: invalid JSON: ") + e.what());
        return out;
    }
    return parse_config_json(j);
}

json to_json(const ScenarioConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    j["name"] = cfg.name;
    j["scenario"] = to_string(cfg.kind);
    j["seed"] = cfg.seed;
    if (!cfg.seeds.empty()) {
        j["seeds"] = cfg.seeds;
    }
    json m;
    m["kind"] = cfg.model.kind == ModelKind::linear_softmax ? "linear_softmax" : "mlp1";
    m["input_dim"] = cfg.model.input_dim;
    m["num_classes"] = cfg.model.num_classes;
    if (cfg.model.kind == ModelKind::mlp1) {
        m["hidden_dim"] = cfg.model.hidden_dim;
        m["activation"] = cfg.model.activation == Activation::tanh ? "tanh" : "relu";
    }
    j["model"] = std::move(m);
    json d;
    if (cfg.dataset.type == DatasetConfig::Type::blobs) {
        d["type"] = "blobs";
        d["num_classes"] = cfg.dataset.num_classes;
        d["dim"] = cfg.dataset.dim;
        d["per_class"] = cfg.dataset.per_class;
        d["sigma"] = cfg.dataset.sigma;
    } else {
        d["type"] = "idx";
        d["images"] = cfg.dataset.images;
        d["labels"] = cfg.dataset.labels;
        d["limit"] = cfg.dataset.limit;
    }
    j["dataset"] = std::move(d);
    json p;
    for (const auto& [id, labels] : cfg.partition.assignments) {
        p[std::to_string(id)] = labels;
    }
    j["partition"] = std::move(p);
    j["protocol"] = {{"eta", cfg.protocol.eta},
                     {"rounds", cfg.protocol.rounds},
                     {"num_clients", cfg.protocol.num_clients}};
    json r = json::object();
    for (const auto& [id, role] : cfg.roles) {
        json rj;
        switch (role.kind) {
            case RoleSpec::Kind::honest: rj["kind"] = "honest"; break;
            case RoleSpec::Kind::dictator: rj["kind"] = "dictator"; break;
            case RoleSpec::Kind::coalition:
                rj["kind"] = "coalition";
                rj["members"] = role.members;
                break;
            case RoleSpec::Kind::cheater:
                rj["kind"] = "cheater";
                rj["partner"] = role.partner;
                rj["betrayal_round"] = role.betrayal_round;
                break;
            case RoleSpec::Kind::probe:
                rj["kind"] = "probe";
                if (role.probe_magnitude > 0.0) {
                    rj["magnitude"] = role.probe_magnitude;
                } else {
                    rj["magnitude_scale"] = role.probe_magnitude_scale;
                }
                break;
        }
        r[std::to_string(id)] = std::move(rj);
    }
    j["roles"] = std::move(r);
    j["outputs"] = cfg.outputs;
    return j;
}

// ---------------------------------------------------------------------------
// Environment and execution

std::vector<const LossEvaluator*> ScenarioEnv::evaluator_ptrs() const {
    std::vector<const LossEvaluator*> ptrs;
    ptrs.reserve(evaluators.size());
    for (const auto& ev : evaluators) {
        ptrs.push_back(ev.get());
    }
    return ptrs;
}

MetricsFn ScenarioEnv::metrics_fn() const {
    return [this](const ParamVector& theta) {
        std::vector<ClientMetrics> out;
        out.reserve(eval_shards.size());
        for (const auto& [id, shard] : eval_shards) {
            ShardMetrics m = eval_metrics(cfg.model, shard, theta);
            out.push_back(ClientMetrics{m.loss, m.accuracy_pct});
        }
        return out;
    };
}

ScenarioEnv build_env(const ScenarioConfig& cfg) {
    ScenarioEnv env;
    env.cfg = cfg;

    if (cfg.dataset.type == DatasetConfig::Type::blobs) {
        env.source = gen_blobs(cfg.dataset.num_classes, cfg.dataset.dim, cfg.dataset.per_class,
                               cfg.dataset.sigma, stream_seed(cfg.seed, kStreamDataset));
    } else {
        env.source = load_idx(cfg.dataset.images, cfg.dataset.labels, cfg.dataset.limit);
    }

    auto shards = partition_by_label(env.source, cfg.partition);
    for (auto& [id, shard] : shards) {
        auto [train, eval] = split_train_eval(shard, kEvalFraction,
                                              stream_seed(cfg.seed, kStreamSplitBase + id));
        env.train_shards[id] = std::move(train);
        env.eval_shards[id] = std::move(eval);
    }

    env.evaluators.reserve(cfg.protocol.num_clients);
    for (int id = 1; id <= cfg.protocol.num_clients; ++id) {
        env.evaluators.push_back(std::make_unique<ModelLossEvaluator>(
            cfg.model, &env.train_shards.at(id), Reduction::mean));
    }

    env.theta0 = init_params(cfg.model, stream_seed(cfg.seed, kStreamInit));
    return env;
}

std::vector<std::unique_ptr<ClientStrategy>> build_strategies(const ScenarioEnv& env) {
    const ScenarioConfig& cfg = env.cfg;
    std::vector<std::unique_ptr<ClientStrategy>> out;
    out.reserve(cfg.protocol.num_clients);

    for (int id = 1; id <= cfg.protocol.num_clients; ++id) {
        const LossEvaluator& ev = *env.evaluators[id - 1];
        auto it = cfg.roles.find(id);
        RoleSpec::Kind kind = it == cfg.roles.end() ? RoleSpec::Kind::honest : it->second.kind;
        switch (kind) {
            case RoleSpec::Kind::honest:
                out.push_back(std::make_unique<HonestStrategy>(id, ev));
                break;
            case RoleSpec::Kind::dictator:
                out.push_back(std::make_unique<DictatorStrategy>(id, ev, cfg.protocol.eta));
                break;
            case RoleSpec::Kind::coalition:
                out.push_back(std::make_unique<CoalitionStrategy>(
                    id, CoalitionSpec{it->second.members}, ev, cfg.protocol.eta));
                break;
            case RoleSpec::Kind::cheater:
                out.push_back(std::make_unique<CheaterStrategy>(
                    id, it->second.partner, it->second.betrayal_round, ev, cfg.protocol.eta));
                break;
            case RoleSpec::Kind::probe: {
                double b = it->second.probe_magnitude;
                if (!(b > 0.0)) {
                    // Relative mode: scale times the median absolute
                    // coordinate of the client's own gradient at theta0.
                    ParamVector g0 = ev.evaluate(env.theta0).grad;
                    std::vector<double> mags(g0.size());
                    for (std::size_t i = 0; i < g0.size(); ++i) {
                        mags[i] = std::fabs(g0.values[i]);
                    }
                    std::sort(mags.begin(), mags.end());
                    double median = mags.size() % 2 == 1
                                        ? mags[mags.size() / 2]
                                        : 0.5 * (mags[mags.size() / 2 - 1] + mags[mags.size() / 2]);
                    b = it->second.probe_magnitude_scale * median;
                    if (!(b > 0.0)) {
                        throw std::runtime_error("probe: median gradient magnitude is zero, "
                                                 "cannot size the probe");
                    }
                }
                out.push_back(std::make_unique<ProbeStrategy>(id, ev, ProbeConfig{b, 0}));
                break;
            }
        }
    }
    return out;
}

bool ScenarioResult::all_checks_passed() const {
    for (const auto& c : checks) {
        if (!c.passed) {
            return false;
        }
    }
    return true;
}

ScenarioResult run_in_env(const ScenarioEnv& env) {
    const ScenarioConfig& cfg = env.cfg;
    auto strategies = build_strategies(env);
    std::vector<ClientStrategy*> ptrs;
    ptrs.reserve(strategies.size());
    for (auto& s : strategies) {
        ptrs.push_back(s.get());
    }

    ScenarioResult result;
    result.records = run_rounds(cfg.protocol, ptrs, env.theta0, env.metrics_fn());

    const auto evs = env.evaluator_ptrs();
    const double eta = cfg.protocol.eta;
    const int rounds = cfg.protocol.rounds;

    switch (cfg.kind) {
        case ScenarioKind::regular:
            break;  // nothing to verify
        case ScenarioKind::single_dictator: {
            int attacker = 0;
            bool is_probe = false;
            for (const auto& [id, role] : cfg.roles) {
                if (role.kind == RoleSpec::Kind::dictator) {
                    attacker = id;
                } else if (role.kind == RoleSpec::Kind::probe) {
                    attacker = id;
                    is_probe = true;
                }
            }
            if (is_probe) {
                auto* probe = dynamic_cast<ProbeStrategy*>(ptrs[attacker - 1]);
                result.eta_hat = probe->eta_hat();
                ParamVector others = zeros_like(env.theta0);
                for (int id = 1; id <= cfg.protocol.num_clients; ++id) {
                    if (id != attacker) {
                        others = add(others, evs[id - 1]->evaluate(env.theta0).grad);
                    }
                }
                // The probe's round-0 update is the recorded all-B vector.
                double b = result.records[0].update_from(attacker).update.values[0];
                ProbeCheck pc = check_eta_estimate(*result.eta_hat, eta, others, b);
                EquivalenceReport rep;
                rep.claim_id = "probe_eta_relative_error";
                rep.lhs_norm = pc.eta_hat;
                rep.rhs_norm = pc.eta_true;
                rep.diff_inf_norm = pc.relative_error;
                rep.tolerance = pc.bound;
                rep.passed = pc.passed;
                result.checks.push_back(rep);
            } else {
                auto solo = solo_trajectory(*evs[attacker - 1], env.theta0, eta, rounds);
                result.checks.push_back(
                    check_single_dictator(result.records, solo, evs, eta, attacker));
            }
            break;
        }
        case ScenarioKind::coalition: {
            std::vector<int> members;
            for (const auto& [id, role] : cfg.roles) {
                if (role.kind == RoleSpec::Kind::coalition) {
                    members.push_back(id);
                }
            }
            std::vector<const LossEvaluator*> member_evs;
            for (int id : members) {
                member_evs.push_back(evs[id - 1]);
            }
            auto subset = subset_trajectory(member_evs, env.theta0, eta, rounds);
            result.checks.push_back(
                check_coalition(result.records, subset, evs, eta, CoalitionSpec{members}));
            break;
        }
        case ScenarioKind::mutual_domination: {
            result.checks.push_back(check_mutual_domination_round2(
                env.theta0, result.records[1].theta_after, evs, eta));
            break;
        }
        case ScenarioKind::betrayal: {
            int cheater = 0;
            for (const auto& [id, role] : cfg.roles) {
                if (role.kind == RoleSpec::Kind::cheater) {
                    cheater = id;
                }
            }
            const RoleSpec& role = cfg.roles.at(cheater);
            int e_round = role.betrayal_round;
            result.checks.push_back(
                check_betrayal(result.records, evs, eta, e_round, cheater, role.partner));

            // Before the betrayal both members follow the coalition
            // protocol, so the coalition identity must hold on that prefix.
            std::vector<int> pair = {std::min(cheater, role.partner),
                                     std::max(cheater, role.partner)};
            std::vector<const LossEvaluator*> pair_evs = {evs[pair[0] - 1], evs[pair[1] - 1]};
            auto subset = subset_trajectory(pair_evs, env.theta0, eta, e_round);
            std::vector<RoundRecord> prefix(result.records.begin(),
                                            result.records.begin() + e_round);
            EquivalenceReport rep = check_coalition(prefix, subset, evs, eta, CoalitionSpec{pair});
            rep.claim_id = "betrayal_pre_e_coalition";
            result.checks.push_back(std::move(rep));
            break;
        }
    }

    for (const auto& m : result.records.back().per_client) {
        result.final_accuracy_pct.push_back(m.accuracy_pct);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Artifacts

std::uint64_t config_hash(const ScenarioConfig& cfg) {
    std::string dump = to_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string resolve_output_dir(const ScenarioConfig& cfg, const std::string& out_override) {
    if (!out_override.empty()) {
        return out_override;
    }
    if (const char* root = std::getenv("FEDSIM_OUT_ROOT")) {
        return std::string(root) + "/" + cfg.name;
    }
    return cfg.outputs;
}

void write_artifacts(const ScenarioConfig& cfg, const ScenarioResult& result,
                     const std::string& outdir) {
    fs::create_directories(outdir);

    {
        std::ofstream csv(outdir + "/curves.csv", std::ios::binary);
        csv << "round,client_id,loss,accuracy\n";
        for (const auto& rec : result.records) {
            for (std::size_t i = 0; i < rec.per_client.size(); ++i) {
                csv << rec.round << ',' << i + 1 << ',' << fmt("%.17g", rec.per_client[i].loss)
                    << ',' << fmt("%.4f", rec.per_client[i].accuracy_pct) << '\n';
            }
        }
    }

    {
        std::ofstream f(outdir + "/accuracy.json", std::ios::binary);
        f << "{\n";
        f << "  \"scenario\": \"" << cfg.name << "\",\n";
        f << "  \"kind\": \"" << to_string(cfg.kind) << "\",\n";
        f << "  \"final_round\": " << result.records.back().round << ",\n";
        f << "  \"accuracy_pct\": {\n";
        for (std::size_t i = 0; i < result.final_accuracy_pct.size(); ++i) {
            f << "    \"" << i + 1 << "\": " << fmt("%.2f", result.final_accuracy_pct[i])
              << (i + 1 < result.final_accuracy_pct.size() ? ",\n" : "\n");
        }
        f << "  }\n}\n";
    }

    {
        json checks = json::array();
        for (const auto& c : result.checks) {
            checks.push_back({{"claim", c.claim_id},
                              {"lhs_norm", c.lhs_norm},
                              {"rhs_norm", c.rhs_norm},
                              {"diff_inf_norm", c.diff_inf_norm},
                              {"residual_inf_norm", c.residual_inf_norm},
                              {"tolerance", c.tolerance},
                              {"passed", c.passed}});
        }
        json doc;
        doc["checks"] = std::move(checks);
        if (result.eta_hat) {
            doc["eta_hat"] = *result.eta_hat;
        }
        std::ofstream f(outdir + "/checks.json", std::ios::binary);
        f << doc.dump(2) << '\n';
    }

    {
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        json stamp;
        stamp["config_hash"] = hash;
        stamp["seed"] = cfg.seed;
        stamp["code_version"] = kCodeVersion;
        stamp["generated_at_unix"] = static_cast<std::int64_t>(std::time(nullptr));
        std::ofstream f(outdir + "/stamp.json", std::ios::binary);
        f << stamp.dump(2) << '\n';
    }
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const std::string& out_override) {
    try {
        ScenarioEnv env = build_env(cfg);
        ScenarioResult result = run_in_env(env);
        write_artifacts(cfg, result, resolve_output_dir(cfg, out_override));
        return result;
    } catch (const std::exception& e) {
        throw std::runtime_error("scenario '" + cfg.name + "': " + e.what());
    }
}

MultiSeedTable run_multi_seed(const ScenarioConfig& cfg, const std::string& out_override) {
    if (cfg.seeds.empty()) {
        throw std::invalid_argument("run_multi_seed: config has no seeds list");
    }
    std::string outdir = resolve_output_dir(cfg, out_override);

    MultiSeedTable table;
    table.seeds = cfg.seeds;
    std::vector<std::vector<double>> rows;  // per seed, per client
    for (std::uint64_t s : cfg.seeds) {
        ScenarioConfig one = cfg;
        one.seed = s;
        one.seeds.clear();
        ScenarioResult r = run_scenario(one, outdir + "/seed_" + std::to_string(s));
        table.all_checks_passed = table.all_checks_passed && r.all_checks_passed();
        rows.push_back(r.final_accuracy_pct);
    }

    const std::size_t clients = rows.front().size();
    const double count = static_cast<double>(rows.size());
    for (std::size_t c = 0; c < clients; ++c) {
        double mean = 0.0;
        for (const auto& row : rows) {
            mean += row[c];
        }
        mean /= count;
        double var = 0.0;
        for (const auto& row : rows) {
            var += (row[c] - mean) * (row[c] - mean);
        }
        var /= count;  // population sigma so a single seed reports exactly 0
        table.accuracy_pct[static_cast<int>(c) + 1] = MultiSeedCell{mean, std::sqrt(var)};
    }

    fs::create_directories(outdir);
    std::ofstream f(outdir + "/accuracy_sigma.json", std::ios::binary);
    f << "{\n  \"scenario\": \"" << cfg.name << "\",\n  \"seeds\": [";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        f << cfg.seeds[i] << (i + 1 < cfg.seeds.size() ? ", " : "");
    }
    f << "],\n  \"accuracy_pct\": {\n";
    std::size_t i = 0;
    for (const auto& [id, cell] : table.accuracy_pct) {
        f << "    \"" << id << "\": {\"mean\": " << fmt("%.2f", cell.mean)
          << ", \"sigma\": " << fmt("%.2f", cell.sigma) << "}"
          << (++i < table.accuracy_pct.size() ? ",\n" : "\n");
    }
    f << "  }\n}\n";
    return table;
}

}  // namespace fedsim
