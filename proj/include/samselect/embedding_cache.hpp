#pragma once

#include <cstddef>
#include <cstdint>
#include <future>
#include <list>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "samselect/segmenter.hpp"

namespace samselect {

// Thread-safe LRU cache of image embeddings keyed by
// (backend id, patch id, canonical viz expression). Concurrent requests for
// the same missing key wait for a single embed call; failed embeds are not
// cached.
class EmbeddingCache {
 public:
  // Capacity 0 disables caching: every request calls embed().
  explicit EmbeddingCache(std::size_t capacity = 4096);

  ImageEmbedding get_or_compute(SegmenterBackend& backend, const RenderedVisualization& rendered);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const;
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  struct Entry {
    std::shared_future<ImageEmbedding> value;
    std::list<Key>::iterator lru_pos;
    std::uint64_t generation = 0;
  };

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::map<Key, Entry> entries_;
  std::list<Key> lru_;  // most recent first
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
  std::uint64_t next_generation_ = 0;
};

}  // namespace samselect
