#include "bindet/remote_backends.hpp"

#include <httplib.h>

namespace bindet::remote {
namespace {

constexpr const char* kDefaultPath = "/infer";

ErrorCode code_from_name(std::string_view name) {
  for (auto c : {ErrorCode::kInvalidArgument, ErrorCode::kDimensionMismatch, ErrorCode::kEmptyMask,
                 ErrorCode::kBehindCamera, ErrorCode::kMalformedInput, ErrorCode::kNotFound,
                 ErrorCode::kIo, ErrorCode::kValidation, ErrorCode::kConfig, ErrorCode::kNoRoi,
                 ErrorCode::kUndefinedAp, ErrorCode::kBackendFailure,
                 ErrorCode::kBackendUnavailable, ErrorCode::kProtocol,
                 ErrorCode::kContractViolation}) {
    if (to_string(c) == name) {
      return c;
    }
  }
  return ErrorCode::kBackendFailure;
}

BackendDescriptor expect_kind(BackendDescriptor d, BackendKind kind) {
  if (d.kind != kind) {
    throw Error(ErrorCode::kConfig, "descriptor kind does not match adapter",
                std::string(to_string(kind)));
  }
  d.implementation = Implementation::kRemote;
  validate(d);
  return d;
}

}  // namespace

HttpClient::HttpClient(std::string endpoint, ClientOptions options) : options_(options) {
  // split "http://host:port/path" into scheme-host-port and path
  const auto scheme = endpoint.find("://");
  const auto path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = endpoint;
    path_ = kDefaultPath;
  } else {
    scheme_host_port_ = endpoint.substr(0, path_start);
    path_ = endpoint.substr(path_start);
  }
}

wire::json HttpClient::post(const wire::json& request, std::string_view stage) const {
  const std::string body = request.dump();
  const std::string stage_name(stage);
  int attempt = 0;
  for (;;) {
    ++attempt;
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    std::optional<Error> failure;
    if (auto res = client.Post(path_, body, "application/json")) {
      wire::json payload;
      try {
        payload = wire::json::parse(res->body);
      } catch (const wire::json::parse_error& e) {
        if (res->status == 200) {
          throw Error(ErrorCode::kProtocol, std::string("unparseable response: ") + e.what(),
                      stage_name);
        }
      }
      if (res->status == 200) {
        if (payload.contains("error")) {
          throw Error(ErrorCode::kProtocol, "error object in a 200 response", stage_name);
        }
        return payload;
      }
      ErrorCode code = wire::error_code_for_status(res->status);
      std::string message = "HTTP " + std::to_string(res->status);
      if (payload.is_object() && payload.contains("error") && payload["error"].is_object()) {
        const auto& err = payload["error"];
        message += ": " + err.value("message", std::string{});
        if (res->status != 503) {
          code = code_from_name(err.value("code", std::string{}));
        }
      }
      failure.emplace(code, message, stage_name);
    } else {
      failure.emplace(ErrorCode::kBackendUnavailable,
                      "transport failure: " + httplib::to_string(res.error()), stage_name);
    }
    failure->with_attempts(attempt);
    if (failure->code() != ErrorCode::kBackendUnavailable || attempt > options_.max_retries) {
      throw *failure;
    }
    std::this_thread::sleep_for(options_.retry_backoff * attempt);
  }
}

RemoteEnhancer::RemoteEnhancer(BackendDescriptor d, ClientOptions options)
    : Enhancer(expect_kind(std::move(d), BackendKind::kEnhancer)),
      client_(*descriptor().endpoint, options) {}

RgbImage RemoteEnhancer::do_run(const RgbImage& image) const {
  return wire::parse_enhancer_response(
      client_.post(wire::enhancer_request(descriptor().model_tag, image), stage()));
}

RemoteRoiDetector::RemoteRoiDetector(BackendDescriptor d, ClientOptions options)
    : RoiDetector(expect_kind(std::move(d), BackendKind::kRoiDetector)),
      client_(*descriptor().endpoint, options) {}

std::vector<ScoredBox> RemoteRoiDetector::do_run(const RgbImage& image,
                                                 const std::string& prompt) const {
  return wire::parse_roi_response(
      client_.post(wire::roi_request(descriptor().model_tag, image, prompt), stage()));
}

RemoteSegmenter::RemoteSegmenter(BackendDescriptor d, ClientOptions options)
    : Segmenter(expect_kind(std::move(d), BackendKind::kSegmenter)),
      client_(*descriptor().endpoint, options) {}

std::vector<SegmentResult> RemoteSegmenter::do_run(const RgbImage& image,
                                                   std::span<const Eigen::Vector2d> points) const {
  return wire::parse_segmenter_response(
      client_.post(wire::segmenter_request(descriptor().model_tag, image, points), stage()));
}

RemoteFeatureExtractor::RemoteFeatureExtractor(BackendDescriptor d, ClientOptions options)
    : FeatureExtractor(expect_kind(std::move(d), BackendKind::kFeatureExtractor)),
      client_(*descriptor().endpoint, options) {}

FeatureOutput RemoteFeatureExtractor::do_run(const RgbImage& image, const BinaryMask* mask) const {
  return wire::parse_feature_response(
      client_.post(wire::feature_request(descriptor().model_tag, image, mask), stage()));
}

RemoteRenderer::RemoteRenderer(BackendDescriptor d, ClientOptions options)
    : Renderer(expect_kind(std::move(d), BackendKind::kRenderer)),
      client_(*descriptor().endpoint, options) {}

RenderOutput RemoteRenderer::do_run(const RenderRequest& request) const {
  return wire::parse_renderer_response(
      client_.post(wire::renderer_request(descriptor().model_tag, request), stage()));
}

BackendSet make_remote_set(const BackendDescriptor& enhancer, const BackendDescriptor& roi,
                           const BackendDescriptor& segmenter, const BackendDescriptor& features,
                           const BackendDescriptor& renderer, ClientOptions options) {
  BackendSet set;
  set.enhancer = std::make_shared<RemoteEnhancer>(enhancer, options);
  set.roi_detector = std::make_shared<RemoteRoiDetector>(roi, options);
  set.segmenter = std::make_shared<RemoteSegmenter>(segmenter, options);
  set.feature_extractor = std::make_shared<RemoteFeatureExtractor>(features, options);
  set.renderer = std::make_shared<RemoteRenderer>(renderer, options);
  return set;
}

BackendService::BackendService(BackendSet local)
    : local_(std::move(local)), server_(std::make_unique<httplib::Server>()) {
  server_->Post(kDefaultPath, [this](const httplib::Request& req, httplib::Response& res) {
    wire::json response;
    int status = 200;
    try {
      wire::json request;
      try {
        request = wire::json::parse(req.body);
      } catch (const wire::json::parse_error& e) {
        throw Error(ErrorCode::kProtocol, std::string("request is not JSON: ") + e.what());
      }
      response = wire::dispatch(local_, request);
    } catch (const Error& e) {
      status = wire::http_status_for(e.code());
      response = wire::error_response(e);
    } catch (const std::exception& e) {
      status = 500;
      response = wire::error_response(Error(ErrorCode::kBackendFailure, e.what()));
    }
    res.status = status;
    res.set_content(response.dump(), "application/json");
  });
}

BackendService::~BackendService() { stop(); }

int BackendService::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) {
    throw Error(ErrorCode::kIo, "cannot bind backend service on " + host);
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void BackendService::stop() {
  if (server_) {
    server_->stop();
  }
  if (thread_.joinable()) {
    thread_.join();
  }
}

std::string BackendService::endpoint() const {
  return "http://" + host_ + ":" + std::to_string(port_) + kDefaultPath;
}

}  // namespace bindet::remote
