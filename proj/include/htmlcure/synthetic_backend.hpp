#pragma once
// Deterministic DOM-and-event page model. Parses the document, lays visible
// elements out on a coarse cell grid per viewport, and executes declared
// in-page behaviors from a <script type="text/x-synth-hooks"> block:
//
// {
//   "state":    {"count": 0, "running": false},
//   "handlers": [
//     {"on":"load","do":[...]},
//     {"on":"click","target":"#start","do":[{"set":"running","to":true}]},
//     {"on":"key","key":"ArrowLeft","do":[{"inc":"x","by":-1}]},
//     {"on":"hover","target":"#card","do":[...]},
//     {"on":"input","target":"#name","do":[...]},
//     {"on":"tick","do":[{"inc":"t","by":1}]}
//   ],
//   "inert":    ["#dead"],              // targets whose events never fire
//   "no_keys":  true                    // declared keys that never respond
// }
//
// Actions: {"set":v,"to":x} {"inc":v,"by":n} {"text":sel,"value":s}
//          {"show":sel} {"hide":sel} {"title":s} {"throw":msg}
//          {"console_error":msg} {"delay_ms":n} (latency shaping)
//
// Elements with data-bind="var" mirror a state variable as their text, so
// state changes show up in the raster. Everything is driven by a virtual
// clock; identical inputs give byte-identical evidence.

#include <map>
#include <optional>

#include <json.hpp>

#include "htmlcure/backend.hpp"
#include "htmlcure/html_dom.hpp"

namespace htmlcure::exec {

class SyntheticBackend final : public BrowserBackend {
public:
    const std::string& name() const override {
        static const std::string n = "synthetic";
        return n;
    }
    BackendCapabilities capabilities() const override { return {true, true, true}; }
    std::unique_ptr<PageSession> open(const std::string& html) override;
};

// Grid cell edge in synthetic pixels. One cell stands in for a pixel block;
// the per-channel threshold of a real differ is modelled by whole-cell
// content comparison.
inline constexpr int kCellPx = 32;

} // namespace htmlcure::exec
