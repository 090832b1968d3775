#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "semsim/crypto.hpp"

namespace semsim {

// Fabric message vocabulary of the directory protocol. Forward retargets a
// request at the node holding the modified copy; Redirect bounces a forward
// whose target no longer holds the block; AckCount tells a writer how many
// invalidation acks to expect (and whether it can serve itself from local
// memory); InstallAck closes a write so the directory can drain queued
// requests for the block.
enum class MsgKind {
    ReadReq,
    WriteReq,
    Forward,
    Redirect,
    Invalidate,
    InvAck,
    AckCount,
    DataResp,
    InstallAck,
};

const char* to_string(MsgKind k);

inline constexpr uint32_t kNoCount = 0xffffffffu;

struct Msg {
    MsgKind kind = MsgKind::ReadReq;
    int src = 0;
    int dst = 0;
    uint64_t va = 0;
    int requestor = -1;
    bool for_write = false;
    bool upgrade = false;     // writer already holds a shared copy
    bool serve_local = false; // requestor's own memory has the valid copy
    uint32_t inv_count = kNoCount;
    uint64_t value = 0;  // cleartext payload (scheme none)
    SealedBlock sealed;  // encrypted payload otherwise
    bool has_sealed = false;
    Seed replenish = 0; // fresh seed granted alongside a forward
    uint64_t ts = 0;
    uint16_t mac = 0;
    uint64_t id = 0;
};

// Wire size model: fixed header plus whatever the message carries.
uint64_t msg_bytes(const Msg& m, bool fabric_mac);

// Control-plane protection: a keyed tag over the message fields plus a
// strictly increasing per-channel timestamp. Replayed or forged messages
// fail verification; the toggle models turning this machinery off.
class FabricGuard {
public:
    FabricGuard(const Key256& key, int nodes);

    void stamp(Msg& m, uint64_t now); // now is the transmission cycle
    bool verify(const Msg& m);        // advances the channel watermark on success

private:
    uint16_t tag_of(const Msg& m) const;
    size_t chan(int src, int dst) const { return static_cast<size_t>(src) * nodes_ + dst; }

    Prf prf_;
    size_t nodes_;
    std::vector<uint64_t> next_ts_;
    std::vector<uint64_t> seen_ts_;
};

enum class AdversaryKind { None, DropInvalidate, ReplayMsg, ForgeData, RevertMemory };

AdversaryKind parse_adversary(const std::string& name);
const char* to_string(AdversaryKind k);

} // namespace semsim
