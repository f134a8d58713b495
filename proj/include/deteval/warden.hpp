#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace deteval {

/// A bounded, shared resource such as "snapshot-restore".
struct ResourceClass {
  std::string name;
  int limit = 1;
};

enum class AcquireResult { Granted, Timeout };

struct WardenEvent {
  enum class Kind { Grant, Release };
  Kind kind;
  std::string resource;
  int permits = 0;
  std::uint64_t container = 0;
  int owner = 0;       // worker id of the container
  int held_after = 0;  // class-wide holdings after the event
};

/// Pending or granted request for permits. Tickets are handed out by
/// ResourceContainer::request and polled until granted.
class PermitRequest {
 public:
  enum class State { Pending, Granted, Cancelled };

  const std::string& resource() const { return resource_; }
  int permits() const { return permits_; }

 private:
  friend class ResourceWarden;
  std::uint64_t container_ = 0;
  std::string resource_;
  int permits_ = 0;
  State state_ = State::Pending;
};

using Ticket = std::shared_ptr<PermitRequest>;

class ResourceContainer;

/// Counting-permit allocator shared by every orchestrator worker.
///
/// Each class has a fixed limit. Requests queue per class and are granted
/// strictly first-come-first-served: a request at the head of the queue that
/// does not fit blocks everything behind it. All methods are thread-safe.
class ResourceWarden {
 public:
  using Listener = std::function<void(const WardenEvent&)>;

  explicit ResourceWarden(std::vector<ResourceClass> classes);
  ResourceWarden(const ResourceWarden&) = delete;
  ResourceWarden& operator=(const ResourceWarden&) = delete;

  /// Invoked under the warden lock for every grant and release, so listener
  /// order equals allocation order.
  void set_listener(Listener listener);

  bool has_class(std::string_view name) const;
  std::vector<ResourceClass> classes() const;
  int limit(std::string_view name) const;
  int held(std::string_view name) const;
  std::size_t waiting(std::string_view name) const;
  std::int64_t granted_total(std::string_view name) const;
  std::int64_t released_total(std::string_view name) const;

 private:
  friend class ResourceContainer;

  struct ClassState {
    int limit = 1;
    int held = 0;
    std::int64_t granted_total = 0;
    std::int64_t released_total = 0;
    std::deque<Ticket> queue;
  };

  struct ContainerState {
    int owner = 0;
    std::map<std::string, int, std::less<>> holdings;
  };

  std::uint64_t attach(int owner);
  void detach(std::uint64_t id);

  Ticket request(std::uint64_t id, std::string_view name, int n);
  bool granted(const Ticket& ticket) const;
  void cancel(const Ticket& ticket);
  AcquireResult acquire(std::uint64_t id, std::string_view name, int n,
                        std::chrono::nanoseconds timeout);
  void release(std::uint64_t id, std::string_view name, int n);
  void release_all(std::uint64_t id);
  int holding(std::uint64_t id, std::string_view name) const;
  std::map<std::string, int, std::less<>> holdings(std::uint64_t id) const;

  ClassState& lookup_locked(std::string_view name);
  const ClassState& lookup_locked(std::string_view name) const;
  Ticket enqueue_locked(std::uint64_t id, std::string_view name, int n);
  void grant_waiters_locked(const std::string& name, ClassState& cls);
  void release_locked(std::uint64_t id, const std::string& name, int n);
  void cancel_locked(const Ticket& ticket);

  mutable std::mutex mu_;
  std::condition_variable granted_cv_;
  std::map<std::string, ClassState, std::less<>> classes_;
  std::map<std::uint64_t, ContainerState> containers_;
  std::uint64_t next_container_ = 1;
  Listener listener_;
};

/// Per-trial view onto the warden that tracks the permits the trial holds.
/// Destroying the container returns everything it holds and cancels its
/// pending requests.
class ResourceContainer {
 public:
  explicit ResourceContainer(ResourceWarden& warden, int owner = 0);
  ~ResourceContainer();
  ResourceContainer(const ResourceContainer&) = delete;
  ResourceContainer& operator=(const ResourceContainer&) = delete;

  /// Queues a request without blocking; poll the ticket for the grant.
  Ticket request(std::string_view name, int n);
  bool poll(const Ticket& ticket) const { return warden_->granted(ticket); }
  void cancel(const Ticket& ticket) { warden_->cancel(ticket); }

  /// Blocks up to `timeout` for the permits.
  template <class Rep, class Period>
  AcquireResult acquire(std::string_view name, int n,
                        std::chrono::duration<Rep, Period> timeout) {
    return warden_->acquire(
        id_, name, n,
        std::chrono::duration_cast<std::chrono::nanoseconds>(timeout));
  }

  void release(std::string_view name, int n) { warden_->release(id_, name, n); }
  void release_all() { warden_->release_all(id_); }

  int held(std::string_view name) const { return warden_->holding(id_, name); }
  std::map<std::string, int, std::less<>> holdings() const {
    return warden_->holdings(id_);
  }
  std::uint64_t id() const { return id_; }
  int owner() const { return owner_; }

 private:
  ResourceWarden* warden_;
  std::uint64_t id_;
  int owner_;
};

}  // namespace deteval
