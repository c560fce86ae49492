#pragma once

#include <json.hpp>

#include "liftbp/adjoint.hpp"

namespace liftbp {

using OrderedJson = nlohmann::ordered_json;

OrderedJson valuation_to_json(const FunctionNetwork& net, const Valuation& vals);
OrderedJson config_to_json(const BPConfig& cfg);
OrderedJson report_to_json(const AdjointReport& rep);
OrderedJson factor_graph_to_json(const FactorGraph& fg);
OrderedJson store_to_json(const FactorGraph& fg, const MessageStore& store);

}  // namespace liftbp
