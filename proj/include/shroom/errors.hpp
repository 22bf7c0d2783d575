#pragma once

#include <stdexcept>

namespace shroom {

// Base class for all pipeline errors; the CLI maps subtypes onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define SHROOM_ERROR_TYPE(NAME) \
    struct NAME : Error {       \
        using Error::Error;     \
    }

SHROOM_ERROR_TYPE(ParseError);       // malformed input file
SHROOM_ERROR_TYPE(SchemaError);      // missing or forbidden field for the declared tier
SHROOM_ERROR_TYPE(InvariantError);   // record violates a data invariant
SHROOM_ERROR_TYPE(DomainError);      // scalar argument outside its stated domain
SHROOM_ERROR_TYPE(IoError);          // filesystem failure
SHROOM_ERROR_TYPE(TierError);        // dataset/sample tier not valid for the operation
SHROOM_ERROR_TYPE(ConfigError);      // bad configuration or usage
SHROOM_ERROR_TYPE(NonFiniteLoss);    // training/fitting loss became NaN or inf
SHROOM_ERROR_TYPE(LengthMismatch);   // parallel sequences of different length
SHROOM_ERROR_TYPE(EmptyInput);       // operation needs at least one element
SHROOM_ERROR_TYPE(MixedThreshold);   // aggregating reports scored at different thresholds
SHROOM_ERROR_TYPE(ClientError);      // annotator call failed, retryable
SHROOM_ERROR_TYPE(FatalClientError); // annotator call failed, aborts the run
SHROOM_ERROR_TYPE(EncodeError);      // encoder backend failure
SHROOM_ERROR_TYPE(CheckpointError);  // unreadable or unsupported checkpoint
SHROOM_ERROR_TYPE(ManifestError);    // manifest references a missing artifact

#undef SHROOM_ERROR_TYPE

}  // namespace shroom
