#pragma once

#include <new>
#include <type_traits>
#include <utility>

#include "turbomem/pool.hpp"

namespace turbomem {

// Typed front end: placement-constructs T in pool slots.
template <class T, class Handler = Pool>
class ObjectPool {
 public:
  using Handle = typename Handler::Handle;

  // Config sized for T; remaining knobs keep their defaults.
  static PoolConfig config_for(std::size_t capacity) {
    PoolConfig cfg;
    cfg.object_size = std::max(sizeof(T), sizeof(std::uint64_t));
    cfg.alignment = std::max(alignof(T), kCacheLine);
    cfg.capacity = capacity;
    return cfg;
  }

  explicit ObjectPool(Handler& handler) : handler_(&handler) {
    if (handler.config().object_size < sizeof(T) || handler.config().alignment < alignof(T))
      throw Error(Errc::invalid_config, "slot too small or under-aligned for T");
  }

  template <class... Args>
  T* create(Handle& h, Args&&... args) {
    const SlotIndex s = handler_->alloc(h);
    void* p = handler_->slot_address(s);
    if constexpr (std::is_nothrow_constructible_v<T, Args...>) {
      return ::new (p) T(std::forward<Args>(args)...);
    } else {
      try {
        return ::new (p) T(std::forward<Args>(args)...);
      } catch (...) {
        handler_->free(h, s);
        throw;
      }
    }
  }

  void destroy(Handle& h, T* obj) {
    const SlotIndex s = handler_->slot_of(obj);
    obj->~T();
    handler_->free(h, s);
  }

  Handler& handler() noexcept { return *handler_; }

 private:
  Handler* handler_;
};

}  // namespace turbomem
