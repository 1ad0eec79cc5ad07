#pragma once

#include <cstddef>
#include <span>

namespace ddosgan {

/// Binary classifier over a fixed feature vector. Implementations are
/// immutable after training and safe to call from several threads.
class Predictor {
public:
    virtual ~Predictor() = default;

    /// Score of the malicious class (label 1), in [0, 1].
    virtual double predict_proba(std::span<const double> x) const = 0;

    virtual int predict(std::span<const double> x) const { return predict_proba(x) >= 0.5 ? 1 : 0; }

    virtual std::size_t n_features() const = 0;
};

}  // namespace ddosgan
