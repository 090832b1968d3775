#include "semsim/sdsm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace semsim {

PadEntry PadFifo::consume() {
    if (q_.empty()) throw std::logic_error("pad fifo underflow");
    PadEntry e = q_.front();
    q_.pop_front();
    return e;
}

void PadBuffer::refresh(uint64_t va, Seed seed, uint64_t ready_at) {
    auto it = map_.find(va);
    if (it != map_.end()) {
        lru_.erase(it->second.pos);
        lru_.push_front(va);
        it->second = {{seed, ready_at}, lru_.begin()};
        return;
    }
    if (map_.size() >= cap_ && !lru_.empty()) {
        uint64_t victim = lru_.back();
        lru_.pop_back();
        map_.erase(victim);
    }
    lru_.push_front(va);
    map_[va] = {{seed, ready_at}, lru_.begin()};
}

std::optional<PadEntry> PadBuffer::take(uint64_t va) {
    auto it = map_.find(va);
    if (it == map_.end()) return std::nullopt;
    PadEntry e = it->second.pad;
    lru_.erase(it->second.pos);
    map_.erase(it);
    return e;
}

void PadBuffer::drop(uint64_t va) {
    auto it = map_.find(va);
    if (it == map_.end()) return;
    lru_.erase(it->second.pos);
    map_.erase(it);
}

void ProcessHeat::touch(uint64_t now, double half_life) {
    heat = value(now, half_life) + 1.0;
    last = now;
}

double ProcessHeat::value(uint64_t now, double half_life) const {
    if (now <= last) return heat;
    return heat * std::exp2(-static_cast<double>(now - last) / half_life);
}

std::vector<size_t> largest_remainder_split(const std::vector<double>& weights, size_t capacity) {
    std::vector<size_t> out(weights.size(), 0);
    if (weights.empty()) return out;
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= 0.0) {
        out[0] = capacity;
        return out;
    }
    size_t given = 0;
    std::vector<std::pair<double, size_t>> rem(weights.size());
    for (size_t i = 0; i < weights.size(); ++i) {
        double exact = weights[i] / total * static_cast<double>(capacity);
        out[i] = static_cast<size_t>(exact);
        given += out[i];
        rem[i] = {exact - static_cast<double>(out[i]), i};
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; given < capacity; ++i, ++given) out[rem[i % rem.size()].second]++;
    return out;
}

} // namespace semsim
