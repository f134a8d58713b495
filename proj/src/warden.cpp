#include "deteval/warden.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "deteval/errors.hpp"

namespace deteval {

ResourceWarden::ResourceWarden(std::vector<ResourceClass> classes) {
  for (auto& c : classes) {
    if (c.limit < 1) {
      throw ConfigError(
          fmt::format("resource class '{}' needs limit >= 1, got {}", c.name, c.limit));
    }
    ClassState st;
    st.limit = c.limit;
    if (!classes_.emplace(c.name, std::move(st)).second) {
      throw ConfigError(fmt::format("resource class '{}' declared twice", c.name));
    }
  }
}

void ResourceWarden::set_listener(Listener listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

bool ResourceWarden::has_class(std::string_view name) const {
  std::lock_guard lock(mu_);
  return classes_.find(name) != classes_.end();
}

std::vector<ResourceClass> ResourceWarden::classes() const {
  std::lock_guard lock(mu_);
  std::vector<ResourceClass> out;
  for (const auto& [name, st] : classes_) out.push_back({name, st.limit});
  return out;
}

int ResourceWarden::limit(std::string_view name) const {
  std::lock_guard lock(mu_);
  return lookup_locked(name).limit;
}

int ResourceWarden::held(std::string_view name) const {
  std::lock_guard lock(mu_);
  return lookup_locked(name).held;
}

std::size_t ResourceWarden::waiting(std::string_view name) const {
  std::lock_guard lock(mu_);
  return lookup_locked(name).queue.size();
}

std::int64_t ResourceWarden::granted_total(std::string_view name) const {
  std::lock_guard lock(mu_);
  return lookup_locked(name).granted_total;
}

std::int64_t ResourceWarden::released_total(std::string_view name) const {
  std::lock_guard lock(mu_);
  return lookup_locked(name).released_total;
}

ResourceWarden::ClassState& ResourceWarden::lookup_locked(std::string_view name) {
  auto it = classes_.find(name);
  if (it == classes_.end()) {
    throw UnknownClass(fmt::format("unknown resource class '{}'", name));
  }
  return it->second;
}

const ResourceWarden::ClassState& ResourceWarden::lookup_locked(
    std::string_view name) const {
  auto it = classes_.find(name);
  if (it == classes_.end()) {
    throw UnknownClass(fmt::format("unknown resource class '{}'", name));
  }
  return it->second;
}

std::uint64_t ResourceWarden::attach(int owner) {
  std::lock_guard lock(mu_);
  const auto id = next_container_++;
  containers_[id].owner = owner;
  return id;
}

void ResourceWarden::detach(std::uint64_t id) {
  std::lock_guard lock(mu_);
  for (auto& [name, cls] : classes_) {
    std::vector<Ticket> mine;
    for (const auto& t : cls.queue) {
      if (t->container_ == id) mine.push_back(t);
    }
    for (const auto& t : mine) cancel_locked(t);
  }
  auto it = containers_.find(id);
  if (it == containers_.end()) return;
  const auto holdings = it->second.holdings;
  for (const auto& [name, n] : holdings) {
    if (n > 0) release_locked(id, name, n);
  }
  containers_.erase(id);
}

Ticket ResourceWarden::enqueue_locked(std::uint64_t id, std::string_view name,
                                      int n) {
  auto& cls = lookup_locked(name);
  if (n < 1) {
    throw std::invalid_argument(fmt::format("permit count must be >= 1, got {}", n));
  }
  if (n > cls.limit) {
    throw std::invalid_argument(fmt::format(
        "request of {} permits exceeds limit {} of '{}'", n, cls.limit, name));
  }
  auto ticket = std::make_shared<PermitRequest>();
  ticket->container_ = id;
  ticket->resource_ = std::string(name);
  ticket->permits_ = n;
  cls.queue.push_back(ticket);
  grant_waiters_locked(ticket->resource_, cls);
  return ticket;
}

void ResourceWarden::grant_waiters_locked(const std::string& name, ClassState& cls) {
  bool any = false;
  while (!cls.queue.empty()) {
    const Ticket head = cls.queue.front();
    if (cls.held + head->permits_ > cls.limit) break;
    cls.queue.pop_front();
    cls.held += head->permits_;
    cls.granted_total += head->permits_;
    head->state_ = PermitRequest::State::Granted;
    auto& c = containers_[head->container_];
    c.holdings[name] += head->permits_;
    any = true;
    if (listener_) {
      listener_({WardenEvent::Kind::Grant, name, head->permits_,
                 head->container_, c.owner, cls.held});
    }
  }
  if (any) granted_cv_.notify_all();
}

Ticket ResourceWarden::request(std::uint64_t id, std::string_view name, int n) {
  std::lock_guard lock(mu_);
  return enqueue_locked(id, name, n);
}

bool ResourceWarden::granted(const Ticket& ticket) const {
  std::lock_guard lock(mu_);
  return ticket->state_ == PermitRequest::State::Granted;
}

void ResourceWarden::cancel_locked(const Ticket& ticket) {
  if (ticket->state_ != PermitRequest::State::Pending) return;
  auto& cls = lookup_locked(ticket->resource_);
  auto it = std::find(cls.queue.begin(), cls.queue.end(), ticket);
  if (it != cls.queue.end()) cls.queue.erase(it);
  ticket->state_ = PermitRequest::State::Cancelled;
  // The removed request may have been blocking the head of the queue.
  grant_waiters_locked(ticket->resource_, cls);
}

void ResourceWarden::cancel(const Ticket& ticket) {
  std::lock_guard lock(mu_);
  cancel_locked(ticket);
}

AcquireResult ResourceWarden::acquire(std::uint64_t id, std::string_view name,
                                      int n, std::chrono::nanoseconds timeout) {
  std::unique_lock lock(mu_);
  auto ticket = enqueue_locked(id, name, n);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  const bool ok = granted_cv_.wait_until(lock, deadline, [&] {
    return ticket->state_ == PermitRequest::State::Granted;
  });
  if (ok) return AcquireResult::Granted;
  cancel_locked(ticket);
  return AcquireResult::Timeout;
}

void ResourceWarden::release_locked(std::uint64_t id, const std::string& name,
                                    int n) {
  auto& cls = lookup_locked(name);
  auto cit = containers_.find(id);
  const int have = cit == containers_.end() ? 0 : [&] {
    auto h = cit->second.holdings.find(name);
    return h == cit->second.holdings.end() ? 0 : h->second;
  }();
  if (n < 1 || n > have) {
    throw OverRelease(fmt::format(
        "container {} releases {} of '{}' but holds {}", id, n, name, have));
  }
  cit->second.holdings[name] -= n;
  cls.held -= n;
  cls.released_total += n;
  if (listener_) {
    listener_({WardenEvent::Kind::Release, name, n, id, cit->second.owner,
               cls.held});
  }
  grant_waiters_locked(name, cls);
}

void ResourceWarden::release(std::uint64_t id, std::string_view name, int n) {
  std::lock_guard lock(mu_);
  lookup_locked(name);
  release_locked(id, std::string(name), n);
}

void ResourceWarden::release_all(std::uint64_t id) {
  std::lock_guard lock(mu_);
  auto it = containers_.find(id);
  if (it == containers_.end()) return;
  const auto holdings = it->second.holdings;
  for (const auto& [name, n] : holdings) {
    if (n > 0) release_locked(id, name, n);
  }
}

int ResourceWarden::holding(std::uint64_t id, std::string_view name) const {
  std::lock_guard lock(mu_);
  lookup_locked(name);
  auto it = containers_.find(id);
  if (it == containers_.end()) return 0;
  auto h = it->second.holdings.find(name);
  return h == it->second.holdings.end() ? 0 : h->second;
}

std::map<std::string, int, std::less<>> ResourceWarden::holdings(
    std::uint64_t id) const {
  std::lock_guard lock(mu_);
  auto it = containers_.find(id);
  if (it == containers_.end()) return {};
  return it->second.holdings;
}

ResourceContainer::ResourceContainer(ResourceWarden& warden, int owner)
    : warden_(&warden), id_(warden.attach(owner)), owner_(owner) {}

ResourceContainer::~ResourceContainer() { warden_->detach(id_); }

Ticket ResourceContainer::request(std::string_view name, int n) {
  return warden_->request(id_, name, n);
}

}  // namespace deteval
