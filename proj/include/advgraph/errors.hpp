#pragma once

#include <stdexcept>
#include <string>

namespace advgraph {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ADVGRAPH_DEFINE_ERROR(Name)         \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

// graph-core
ADVGRAPH_DEFINE_ERROR(InvalidGraph);
ADVGRAPH_DEFINE_ERROR(InfeasibleFlip);
ADVGRAPH_DEFINE_ERROR(SelfLoop);
// gcn-model
ADVGRAPH_DEFINE_ERROR(ShapeMismatch);
ADVGRAPH_DEFINE_ERROR(DivergedLoss);
// attack-engine
ADVGRAPH_DEFINE_ERROR(NoFeasibleFlip);
ADVGRAPH_DEFINE_ERROR(TooLarge);
// defense-suite
ADVGRAPH_DEFINE_ERROR(EmptyScope);
// robustness-metrics
ADVGRAPH_DEFINE_ERROR(EmptySet);
ADVGRAPH_DEFINE_ERROR(UndefinedBaseline);
// community-analysis
ADVGRAPH_DEFINE_ERROR(NoEdges);
// experiment-harness
ADVGRAPH_DEFINE_ERROR(ParseError);
ADVGRAPH_DEFINE_ERROR(CountMismatch);
ADVGRAPH_DEFINE_ERROR(IoError);
ADVGRAPH_DEFINE_ERROR(DataError);
ADVGRAPH_DEFINE_ERROR(ConfigError);

#undef ADVGRAPH_DEFINE_ERROR

}  // namespace advgraph
