#pragma once

#include <stdexcept>
#include <string>

namespace wafer {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define WAFER_DEFINE_ERROR(Name, Base)   \
  class Name : public Base {             \
   public:                               \
    using Base::Base;                    \
  };

WAFER_DEFINE_ERROR(DimensionError, Error)
WAFER_DEFINE_ERROR(ConfigError, Error)
WAFER_DEFINE_ERROR(LabelError, Error)
WAFER_DEFINE_ERROR(StateError, Error)
WAFER_DEFINE_ERROR(NumericError, Error)
WAFER_DEFINE_ERROR(FileError, Error)
WAFER_DEFINE_ERROR(ParseError, Error)
WAFER_DEFINE_ERROR(UnsupportedFormatError, ParseError)
WAFER_DEFINE_ERROR(ManifestError, ParseError)
WAFER_DEFINE_ERROR(SplitError, Error)
WAFER_DEFINE_ERROR(CompositionError, Error)
WAFER_DEFINE_ERROR(OptimizerError, Error)
WAFER_DEFINE_ERROR(MetricsError, Error)
WAFER_DEFINE_ERROR(IndexError, Error)
WAFER_DEFINE_ERROR(UsageError, Error)
WAFER_DEFINE_ERROR(StatsError, Error)
WAFER_DEFINE_ERROR(SpecError, Error)

// Weight-file load failures.
WAFER_DEFINE_ERROR(LoadError, Error)
WAFER_DEFINE_ERROR(MagicError, LoadError)
WAFER_DEFINE_ERROR(MissingTensorError, LoadError)
WAFER_DEFINE_ERROR(UnexpectedTensorError, LoadError)
WAFER_DEFINE_ERROR(ShapeMismatchError, LoadError)
WAFER_DEFINE_ERROR(PayloadError, LoadError)

#undef WAFER_DEFINE_ERROR

/// Divergence during training. epoch is 1-based; batch is the 0-based
/// minibatch index within the epoch (-1 when not tied to a batch).
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch = -1, int batch = -1)
      : Error(what), epoch_(epoch), batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_, batch_;
};

}  // namespace wafer
