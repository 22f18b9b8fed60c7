#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pilae/error.hpp"

namespace pilae {

// Machine-readable summary of one training or evaluation run. Serialized
// as a single JSON line; every field round-trips through parse_run_report.
struct RunReport {
    std::string dataset;
    std::vector<std::size_t> architecture;
    std::vector<double> layer_seconds;
    double total_seconds = 0.0;
    std::string head;
    double train_accuracy = -1.0;  // negative means not evaluated
    double test_accuracy = -1.0;
    std::vector<double> rank_ratios;
    std::vector<double> identity_trace;
    std::string stopping_reason;
    double lambda = 0.0;
    double lambda_hat = 0.0;
    std::size_t input_rank = 0;
    std::size_t input_dim = 0;
    std::uint64_t split_hash = 0;
    std::map<std::string, std::string> config;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["dataset"] = dataset;
        j["architecture"] = architecture;
        j["layer_seconds"] = layer_seconds;
        j["total_seconds"] = total_seconds;
        j["head"] = head;
        j["train_accuracy"] = train_accuracy;
        j["test_accuracy"] = test_accuracy;
        j["rank_ratios"] = rank_ratios;
        j["identity_trace"] = identity_trace;
        j["stopping_reason"] = stopping_reason;
        j["lambda"] = lambda;
        j["lambda_hat"] = lambda_hat;
        j["input_rank"] = input_rank;
        j["input_dim"] = input_dim;
        j["split_hash"] = split_hash;
        j["config"] = config;
        return j;
    }
    std::string to_json_line() const { return to_json().dump(); }
};

inline RunReport parse_run_report(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("run report is not valid JSON: ") + e.what());
    }
    RunReport r;
    try {
        r.dataset = j.at("dataset").get<std::string>();
        r.architecture = j.at("architecture").get<std::vector<std::size_t>>();
        r.layer_seconds = j.at("layer_seconds").get<std::vector<double>>();
        r.total_seconds = j.at("total_seconds").get<double>();
        r.head = j.at("head").get<std::string>();
        r.train_accuracy = j.at("train_accuracy").get<double>();
        r.test_accuracy = j.at("test_accuracy").get<double>();
        r.rank_ratios = j.at("rank_ratios").get<std::vector<double>>();
        r.identity_trace = j.at("identity_trace").get<std::vector<double>>();
        r.stopping_reason = j.at("stopping_reason").get<std::string>();
        r.lambda = j.at("lambda").get<double>();
        r.lambda_hat = j.at("lambda_hat").get<double>();
        r.input_rank = j.at("input_rank").get<std::size_t>();
        r.input_dim = j.at("input_dim").get<std::size_t>();
        r.split_hash = j.at("split_hash").get<std::uint64_t>();
        r.config = j.at("config").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("run report is missing a field: ") + e.what());
    }
    return r;
}

inline bool reports_equal_ignoring_timing(RunReport a, RunReport b) {
    a.layer_seconds.clear();
    b.layer_seconds.clear();
    a.total_seconds = b.total_seconds = 0.0;
    return a.to_json() == b.to_json();
}

}  // namespace pilae
