#pragma once

#include <stdexcept>
#include <string>

namespace draft {

// Every failure the library can raise carries one of these classes so the CLI
// can map it to a stable exit code and a one-line diagnostic.
enum class ErrorCode {
    kDimension,            // shape mismatch between tensors or config and data
    kRank,                 // tensor rank outside what an op accepts
    kInvalidMask,          // attention/feature mask malformed for the sequence
    kSequenceTooShort,     // utterance shorter than the front-end can consume
    kConfig,               // bad config file, unknown key, out-of-range value
    kState,                // API called in the wrong order (e.g. backward twice)
    kUnsupportedFormat,    // wav not 16 kHz mono 16-bit PCM, unknown extension
    kCorruptFile,          // file ends early or fails a structural check
    kTokenization,         // transcript contains a symbol outside the alphabet
    kInfeasibleAlignment,  // CTC label too long for the number of frames
    kUndefinedWer,         // empty reference corpus
    kCheckpointFormat,     // checkpoint bytes violate the container layout
    kCheckpointContent,    // well-formed checkpoint incompatible with the model
    kTraining,             // non-finite loss or other mid-run failure
    kUsage,                // CLI invoked with inconsistent arguments
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

    // Exit status for the CLI: distinct small integers per class, 0 reserved
    // for success, 1 reserved for unclassified failures.
    int exit_status() const { return 2 + static_cast<int>(code_); }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void check(bool ok, ErrorCode code, const std::string& message) {
    if (!ok) fail(code, message);
}

}  // namespace draft
