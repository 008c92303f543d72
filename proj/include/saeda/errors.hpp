#pragma once
// Error type shared by the whole toolkit. A single exception class with a
// machine-checkable code keeps throw sites terse while letting tests (and
// the CLI) distinguish failure kinds without parsing message text.

#include <stdexcept>
#include <string>

namespace saeda {

enum class ErrCode {
  bad_config,        // invalid field in a config struct / config file
  shape_mismatch,    // tensor/batch shapes disagree
  value_error,       // value outside its contract (e.g. probability row sum)
  missing_class,     // a class id absent where every class is required
  schedule_slots,    // regression classes exceed roughness schedule slots
  missing_manifest,  // dataset/model directory has no manifest.json
  bad_version,       // unknown format_version in a manifest
  size_mismatch,     // manifest count disagrees with binary payload size
  param_count,       // model parameter blob has wrong element count
  kind_mismatch,     // classifier checkpoint loaded where regressor expected (or v.v.)
  stage_order,       // pipeline stage invoked before its predecessor finished
  divergence,        // training loss became non-finite
  io_error,          // filesystem read/write failure
};

class Error : public std::runtime_error {
public:
  Error(ErrCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrCode code() const { return code_; }

private:
  ErrCode code_;
};

[[noreturn]] inline void fail(ErrCode code, const std::string& msg) { throw Error(code, msg); }

} // namespace saeda
