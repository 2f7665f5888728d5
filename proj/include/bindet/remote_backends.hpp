#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include "bindet/backends.hpp"
#include "bindet/wire.hpp"

namespace httplib {
class Server;
}

namespace bindet::remote {

struct ClientOptions {
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;  // extra attempts after the first, for unavailable errors only
  std::chrono::milliseconds retry_backoff{100};
};

/// One HTTP POST per call to `<endpoint>` (default path /infer). Maps HTTP
/// status codes and transport failures to typed errors; retries only
/// kBackendUnavailable.
class HttpClient {
 public:
  HttpClient(std::string endpoint, ClientOptions options);

  [[nodiscard]] wire::json post(const wire::json& request, std::string_view stage) const;

 private:
  std::string scheme_host_port_;
  std::string path_;
  ClientOptions options_;
};

class RemoteEnhancer final : public Enhancer {
 public:
  RemoteEnhancer(BackendDescriptor d, ClientOptions options = {});

 protected:
  RgbImage do_run(const RgbImage& image) const override;

 private:
  HttpClient client_;
};

class RemoteRoiDetector final : public RoiDetector {
 public:
  RemoteRoiDetector(BackendDescriptor d, ClientOptions options = {});

 protected:
  std::vector<ScoredBox> do_run(const RgbImage& image, const std::string& prompt) const override;

 private:
  HttpClient client_;
};

class RemoteSegmenter final : public Segmenter {
 public:
  RemoteSegmenter(BackendDescriptor d, ClientOptions options = {});

 protected:
  std::vector<SegmentResult> do_run(const RgbImage& image,
                                    std::span<const Eigen::Vector2d> points) const override;

 private:
  HttpClient client_;
};

class RemoteFeatureExtractor final : public FeatureExtractor {
 public:
  RemoteFeatureExtractor(BackendDescriptor d, ClientOptions options = {});

 protected:
  FeatureOutput do_run(const RgbImage& image, const BinaryMask* mask) const override;

 private:
  HttpClient client_;
};

class RemoteRenderer final : public Renderer {
 public:
  RemoteRenderer(BackendDescriptor d, ClientOptions options = {});

 protected:
  RenderOutput do_run(const RenderRequest& request) const override;

 private:
  HttpClient client_;
};

/// Remote adapters for all five kinds. Descriptors must carry endpoints.
BackendSet make_remote_set(const BackendDescriptor& enhancer, const BackendDescriptor& roi,
                           const BackendDescriptor& segmenter, const BackendDescriptor& features,
                           const BackendDescriptor& renderer, ClientOptions options = {});

/// Serves a set of local backends over the wire format on POST /infer.
/// Wrapping mocks gives the loopback fixture the adapters are tested against.
class BackendService {
 public:
  explicit BackendService(BackendSet local);
  BackendService(const BackendService&) = delete;
  BackendService& operator=(const BackendService&) = delete;
  ~BackendService();

  /// Binds to host on a free port (or `port` when nonzero) and serves in a
  /// background thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  [[nodiscard]] std::string endpoint() const;
  [[nodiscard]] int port() const noexcept { return port_; }

 private:
  BackendSet local_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace bindet::remote
