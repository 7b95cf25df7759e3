#pragma once

#include <memory>

#include "e2r/config.hpp"

namespace e2r {

// HTTP front end over the session store. Sessions are loaded lazily from disk,
// so a restarted service continues where the previous one stopped.
class Service {
 public:
  // Loads and checks the photo library, static directory and store root.
  // Throws ConfigInvalid naming the offending path.
  explicit Service(Config config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Throws PortUnavailable.
  void start();
  int port() const;
  // Stops accepting requests and waits for in-flight ones.
  void stop();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace e2r
