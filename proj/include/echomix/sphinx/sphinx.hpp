#pragma once

#include <mutex>
#include <unordered_map>
#include <unordered_set>

#include "echomix/crypto/kem.hpp"
#include "echomix/crypto/nike.hpp"
#include "echomix/sphinx/geometry.hpp"

namespace echomix::sphinx {

constexpr size_t COMMAND_ID_SIZE = 16;

enum class CommandType : uint8_t { Forward = 1, Deliver = 2, SurbReply = 3 };

struct TerminalCommand {
    CommandType type = CommandType::Deliver;
    ByteArray<COMMAND_ID_SIZE> id{};  // recipient id or reply-block id
};

struct PathHop {
    ByteArray<32> node_id{};
    Bytes public_key;  // NIKE public key or KEM public key per variant
    uint32_t delay_hint = 0;
};

struct PathSpec {
    std::vector<PathHop> hops;
    TerminalCommand terminal;
};

struct SphinxPacket {
    Bytes alpha, beta, gamma, delta;

    /// Wire form: ad (2) || alpha || beta || gamma || delta; every packet
    /// of a geometry has the same length at every hop.
    Bytes serialize() const;
    static SphinxPacket parse(const SphinxGeometry& g, ByteView wire);
};

struct UnwrapResult {
    CommandType kind = CommandType::Forward;
    // Forward
    ByteArray<32> next_node{};
    uint32_t delay_hint = 0;
    SphinxPacket next;
    // Deliver / SurbReply
    ByteArray<COMMAND_ID_SIZE> id{};
    Bytes payload;  // Deliver: tag-checked payload; SurbReply: raw delta
};

/// Per-node, per-epoch duplicate-suppression keyed by a tag derived from
/// the hop shared secret. Thread-safe check-and-insert.
class ReplayCache {
  public:
    /// Returns true when the tag is fresh (and records it).
    bool check_and_insert(const ByteArray<16>& tag);
    void clear();
    size_t size() const;

  private:
    mutable std::mutex mutex_;
    std::unordered_set<std::string> seen_;
};

SphinxPacket nike_wrap(const SphinxGeometry& g, const crypto::Nike& nike, const PathSpec& path,
                       ByteView payload, Rng& rng);
UnwrapResult nike_unwrap(const SphinxGeometry& g, const crypto::Nike& nike, ByteView node_priv,
                         const SphinxPacket& packet, ReplayCache* replay = nullptr);

SphinxPacket kem_wrap(const SphinxGeometry& g, const crypto::Kem& kem, const PathSpec& path,
                      ByteView payload, Rng& rng);
UnwrapResult kem_unwrap(const SphinxGeometry& g, const crypto::Kem& kem, ByteView node_priv,
                        const SphinxPacket& packet, ReplayCache* replay = nullptr);

/// A prebuilt reply header plus what the far side needs to encrypt a
/// payload back. Contains no information about the creator beyond the
/// first hop of the reply path.
struct Surb {
    ByteArray<32> first_hop{};
    ByteArray<COMMAND_ID_SIZE> surb_id{};
    Key256 payload_key{};
    Key256 tag_key{};
    Bytes header;  // ad || alpha || beta || gamma

    /// ad (2) || first_hop (32) || surb_id (16) || payload_key (32) ||
    /// tag_key (32) || spare (16) || header.
    Bytes serialize() const;
    static Surb deserialize(const SphinxGeometry& g, ByteView wire);
};

/// Creator-side decryption material for one reply block.
struct SurbKeySet {
    ByteArray<COMMAND_ID_SIZE> surb_id{};
    std::vector<Key256> hop_sprp_keys;  // reply path order
    Key256 payload_key{};
    Key256 tag_key{};
};

std::pair<Surb, SurbKeySet> surb_create(const SphinxGeometry& g, const crypto::Nike& nike,
                                        const PathSpec& reply_path, Rng& rng);
std::pair<Surb, SurbKeySet> surb_create(const SphinxGeometry& g, const crypto::Kem& kem,
                                        const PathSpec& reply_path, Rng& rng);

/// Used by the replying service: wraps `payload` under the SURB. The
/// result enters the network at surb.first_hop.
SphinxPacket surb_reply(const SphinxGeometry& g, const Surb& surb, ByteView payload);

/// Creator-side store enforcing single use: decrypt consumes the key set.
class SurbKeyStore {
  public:
    void put(SurbKeySet keys);
    /// Throws SphinxError for unknown or already-consumed ids, or on a
    /// failed payload tag.
    Bytes decrypt(const ByteArray<COMMAND_ID_SIZE>& surb_id, ByteView delta);
    size_t pending() const;

  private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, SurbKeySet> keys_;
};

}  // namespace echomix::sphinx
