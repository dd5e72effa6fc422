#include "echomix/pigeonhole/shard.hpp"

#include <algorithm>

#include "echomix/crypto/hash.hpp"

namespace echomix::pigeonhole {

std::vector<size_t> ShardMap::select(ByteView box_id) const {
    if (k > replicas.size()) throw PigeonholeError("shard: k exceeds replica count");
    if (k == 0) throw PigeonholeError("shard: k must be positive");
    std::vector<std::pair<ByteArray<32>, size_t>> order;
    order.reserve(replicas.size());
    for (size_t i = 0; i < replicas.size(); ++i) {
        crypto::Sha256 h;
        h.update(replicas[i].public_key);
        h.update(box_id);
        order.emplace_back(h.finish(), i);
    }
    std::sort(order.begin(), order.end());
    std::vector<size_t> out(k);
    for (size_t i = 0; i < k; ++i) out[i] = order[i].second;
    return out;
}

}  // namespace echomix::pigeonhole
