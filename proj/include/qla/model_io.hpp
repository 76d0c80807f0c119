#pragma once

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qla/chains.hpp"
#include "qla/distributions.hpp"
#include "qla/errors.hpp"
#include "qla/real.hpp"

namespace qla {

namespace detail {

// SAX pass recording the raw decimal literal of every number token by JSON
// pointer path, so high-precision tiers can construct values from the full
// literal instead of a double-rounded one.
class RawNumberRecorder : public nlohmann::json_sax<nlohmann::json> {
public:
    std::map<std::string, std::string> literals;

    bool null() override { return true; }
    bool boolean(bool) override { return true; }
    bool number_integer(number_integer_t v) override {
        literals[path()] = std::to_string(v);
        return true;
    }
    bool number_unsigned(number_unsigned_t v) override {
        literals[path()] = std::to_string(v);
        return true;
    }
    bool number_float(number_float_t, const string_t &raw) override {
        literals[path()] = raw;
        return true;
    }
    bool string(string_t &) override { return true; }
    bool binary(binary_t &) override { return true; }
    bool start_object(std::size_t) override {
        stack_.push_back({Frame::object, 0, pending_key_});
        return true;
    }
    bool key(string_t &k) override {
        pending_key_ = k;
        return true;
    }
    bool end_object() override {
        stack_.pop_back();
        return true;
    }
    bool start_array(std::size_t) override {
        stack_.push_back({Frame::array, 0, pending_key_});
        return true;
    }
    bool end_array() override {
        stack_.pop_back();
        return true;
    }
    bool parse_error(std::size_t, const std::string &, const nlohmann::json::exception &e) override {
        throw InvalidConfig(std::string("json parse error: ") + e.what());
    }

private:
    struct Frame {
        enum Kind { object, array } kind;
        std::size_t index;
        std::string key_of_parent;
    };

    std::string path() {
        // path of the value event being delivered now
        std::string p;
        for (std::size_t i = 1; i < stack_.size(); ++i) {
            const auto &f = stack_[i];
            if (stack_[i - 1].kind == Frame::object)
                p += "/" + f.key_of_parent;
            else
                p += "/" + std::to_string(stack_[i - 1].index);
        }
        if (stack_.empty()) return p;
        if (stack_.back().kind == Frame::object) {
            p += "/" + pending_key_;
        } else {
            p += "/" + std::to_string(stack_.back().index);
            ++stack_.back().index;
        }
        return p;
    }

    std::vector<Frame> stack_;
    std::string pending_key_;
};

}  // namespace detail

// A parsed model config: validated JSON plus the raw literal of every number
// in it.
struct ModelConfig {
    enum class Kind { mg1n_vacation, mg1n, gim1n };
    Kind kind = Kind::mg1n_vacation;
    nlohmann::json doc;
    std::map<std::string, std::string> literals;

    std::string literal_at(const std::string &ptr) const {
        auto it = literals.find(ptr);
        if (it != literals.end()) return it->second;
        throw InvalidConfig("expected a number at " + ptr);
    }
};

namespace detail {

inline void check_keys(const nlohmann::json &obj, const std::vector<std::string> &allowed,
                       const std::string &where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto &k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw InvalidConfig("unknown field \"" + it.key() + "\" in " + where);
    }
}

template <Scalar R>
R number_field(const ModelConfig &cfg, const nlohmann::json &obj, const std::string &ptr,
               const std::string &key) {
    if (!obj.contains(key)) throw InvalidConfig("missing field \"" + key + "\" at " + ptr);
    const auto &v = obj.at(key);
    if (v.is_string()) return from_decimal<R>(v.template get<std::string>());
    if (!v.is_number()) throw InvalidConfig("field \"" + key + "\" at " + ptr + " must be a number");
    return from_decimal<R>(cfg.literal_at(ptr + "/" + key));
}

template <Scalar R>
DistributionSpec<R> parse_distribution(const ModelConfig &cfg, const std::string &ptr) {
    const nlohmann::json *node = &cfg.doc;
    {
        // resolve the pointer manually so error messages carry the path
        std::istringstream ss(ptr);
        std::string tok;
        while (std::getline(ss, tok, '/'))
            if (!tok.empty()) node = &node->at(tok);
    }
    const auto &obj = *node;
    if (!obj.is_object()) throw InvalidConfig("distribution at " + ptr + " must be an object");
    if (!obj.contains("family")) throw InvalidConfig("distribution at " + ptr + " needs a family");
    const std::string fam = obj.at("family").template get<std::string>();
    if (fam == "exponential") {
        check_keys(obj, {"family", "rate"}, ptr);
        return DistributionSpec<R>::exponential(number_field<R>(cfg, obj, ptr, "rate"));
    }
    if (fam == "erlang") {
        check_keys(obj, {"family", "shape", "rate"}, ptr);
        if (!obj.contains("shape") || !obj.at("shape").is_number_integer())
            throw InvalidConfig("erlang shape must be an integer at " + ptr);
        return DistributionSpec<R>::erlang(obj.at("shape").template get<int>(),
                                           number_field<R>(cfg, obj, ptr, "rate"));
    }
    if (fam == "deterministic") {
        check_keys(obj, {"family", "value"}, ptr);
        return DistributionSpec<R>::deterministic(number_field<R>(cfg, obj, ptr, "value"));
    }
    if (fam == "hyperexponential") {
        check_keys(obj, {"family", "weights", "rates"}, ptr);
        if (!obj.contains("weights") || !obj.contains("rates") || !obj.at("weights").is_array() ||
            !obj.at("rates").is_array())
            throw InvalidConfig("hyperexponential needs weights and rates arrays at " + ptr);
        std::vector<R> w, p;
        for (std::size_t i = 0; i < obj.at("weights").size(); ++i)
            w.push_back(from_decimal<R>(cfg.literal_at(ptr + "/weights/" + std::to_string(i))));
        for (std::size_t i = 0; i < obj.at("rates").size(); ++i)
            p.push_back(from_decimal<R>(cfg.literal_at(ptr + "/rates/" + std::to_string(i))));
        return DistributionSpec<R>::hyper_exponential(std::move(w), std::move(p));
    }
    if (fam == "pareto") {
        check_keys(obj, {"family", "alpha", "scale"}, ptr);
        return DistributionSpec<R>::pareto(number_field<R>(cfg, obj, ptr, "alpha"),
                                           number_field<R>(cfg, obj, ptr, "scale"));
    }
    if (fam == "zero") {
        check_keys(obj, {"family"}, ptr);
        return DistributionSpec<R>::zero();
    }
    throw InvalidConfig("unknown distribution family \"" + fam + "\" at " + ptr);
}

}  // namespace detail

// The arrival_rate field; for gim1n configs this is the service rate mu.
template <Scalar R>
R arrival_rate(const ModelConfig &cfg) {
    const auto &v = cfg.doc.at("arrival_rate");
    R rate = v.is_string() ? from_decimal<R>(v.template get<std::string>())
                           : from_decimal<R>(cfg.literal_at("/arrival_rate"));
    if (!(rate > 0)) throw InvalidConfig("arrival_rate must be > 0");
    return rate;
}

inline ModelConfig parse_model_config(const std::string &text) {
    ModelConfig cfg;
    detail::RawNumberRecorder rec;
    if (!nlohmann::json::sax_parse(text, &rec)) throw InvalidConfig("json parse failed");
    cfg.literals = std::move(rec.literals);
    cfg.doc = nlohmann::json::parse(text);
    if (!cfg.doc.is_object()) throw InvalidConfig("config must be a json object");
    detail::check_keys(cfg.doc, {"arrival_rate", "service", "vacation", "queue_kind"}, "config");
    if (!cfg.doc.contains("arrival_rate") || !cfg.doc.contains("service"))
        throw InvalidConfig("config requires arrival_rate and service");
    std::string kind = cfg.doc.value("queue_kind", std::string("mg1n_vacation"));
    if (kind == "mg1n_vacation") {
        cfg.kind = ModelConfig::Kind::mg1n_vacation;
        if (!cfg.doc.contains("vacation"))
            throw InvalidConfig("mg1n_vacation config requires a vacation law");
    } else if (kind == "mg1n") {
        cfg.kind = ModelConfig::Kind::mg1n;
        if (cfg.doc.contains("vacation") &&
            !detail::parse_distribution<double>(cfg, "/vacation").is_zero())
            throw InvalidConfig("mg1n configs take no vacation law (or only the zero one)");
    } else if (kind == "gim1n") {
        cfg.kind = ModelConfig::Kind::gim1n;
        if (cfg.doc.contains("vacation"))
            throw InvalidConfig("gim1n config takes no vacation law");
    } else {
        throw InvalidConfig("unknown queue_kind \"" + kind + "\"");
    }
    // validate distribution objects (and their parameters) eagerly
    (void)detail::parse_distribution<double>(cfg, "/service");
    if (cfg.doc.contains("vacation")) (void)detail::parse_distribution<double>(cfg, "/vacation");
    (void)arrival_rate<double>(cfg);
    return cfg;
}

inline ModelConfig load_model_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open model config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model_config(ss.str());
}

// The "service" distribution object; for gim1n it is the interarrival law.
template <Scalar R>
DistributionSpec<R> primary_law(const ModelConfig &cfg) {
    return detail::parse_distribution<R>(cfg, "/service");
}

// The M/G/1/N(-V) queue model; not meaningful for gim1n configs.
template <Scalar R>
QueueModel<R> to_queue_model(const ModelConfig &cfg) {
    if (cfg.kind == ModelConfig::Kind::gim1n)
        throw InvalidConfig("gim1n configs describe the dual queue, not an M/G/1 model");
    auto service = detail::parse_distribution<R>(cfg, "/service");
    auto vacation = cfg.kind == ModelConfig::Kind::mg1n
                        ? DistributionSpec<R>::zero()
                        : detail::parse_distribution<R>(cfg, "/vacation");
    return QueueModel<R>(arrival_rate<R>(cfg), std::move(service), std::move(vacation));
}

}  // namespace qla
