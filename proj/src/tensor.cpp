#include "stereotrace/tensor.hpp"

#include <cmath>

namespace stereotrace {

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace stereotrace
