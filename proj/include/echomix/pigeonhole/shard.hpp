#pragma once

#include "echomix/bytes.hpp"

namespace echomix::pigeonhole {

struct PigeonholeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Consistent-hash shard map: the k replicas responsible for a box are
/// the first k when all replicas are sorted by H(replica_pub || box_id).
/// Anyone holding the box ID computes the same set; the selection is
/// indistinguishable from a uniform k-subset.
struct ShardMap {
    struct Entry {
        ByteArray<32> replica_id{};
        Bytes public_key;
    };

    std::vector<Entry> replicas;
    size_t k = 2;

    /// Indices (into `replicas`) of the k responsible replicas.
    std::vector<size_t> select(ByteView box_id) const;
};

}  // namespace echomix::pigeonhole
