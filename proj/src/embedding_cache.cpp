#include "samselect/embedding_cache.hpp"

namespace samselect {

EmbeddingCache::EmbeddingCache(std::size_t capacity) : capacity_(capacity) {}

ImageEmbedding EmbeddingCache::get_or_compute(SegmenterBackend& backend,
                                              const RenderedVisualization& rendered) {
  if (capacity_ == 0 || !backend.capabilities().embedding_cacheable) return backend.embed(rendered);

  Key key{backend.id(), rendered.patch_id, format_viz_expr(rendered.spec)};
  std::promise<ImageEmbedding> promise;
  std::shared_future<ImageEmbedding> future;
  bool owner = false;
  std::uint64_t generation = 0;
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      ++hits_;
      lru_.splice(lru_.begin(), lru_, it->second.lru_pos);
      future = it->second.value;
    } else {
      ++misses_;
      owner = true;
      future = promise.get_future().share();
      lru_.push_front(key);
      generation = ++next_generation_;
      entries_.emplace(key, Entry{future, lru_.begin(), generation});
      while (entries_.size() > capacity_) {
        entries_.erase(lru_.back());
        lru_.pop_back();
      }
    }
  }

  if (owner) {
    try {
      promise.set_value(backend.embed(rendered));
    } catch (...) {
      {
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(key);
            it != entries_.end() && it->second.generation == generation) {
          lru_.erase(it->second.lru_pos);
          entries_.erase(it);
        }
      }
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::size_t EmbeddingCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t EmbeddingCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

}  // namespace samselect
