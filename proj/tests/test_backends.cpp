#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "bindet/image_io.hpp"
#include "bindet/mock_backends.hpp"
#include "bindet/remote_backends.hpp"
#include "bindet/template_match.hpp"
#include "bindet/wire.hpp"

// After Eigen: <resolv.h> defines a _res macro that breaks Eigen's headers.
#include <httplib.h>

namespace bindet {
namespace {

using remote::BackendService;
using remote::ClientOptions;

RgbImage random_image(std::mt19937_64& rng, int w, int h, int levels) {
  std::uniform_int_distribution<int> d(0, levels - 1);
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(d(rng) * (255 / std::max(levels - 1, 1)));
      set_rgb(img, x, y, {v, static_cast<std::uint8_t>(255 - v), v});
    }
  }
  return img;
}

// BFS over the 4-neighborhood; independent of the stack-based mock.
BinaryMask oracle_component(const RgbImage& img, int sx, int sy, Rgb background) {
  BinaryMask m(img.width(), img.height());
  if (rgb_at(img, sx, sy) == background) {
    return m;
  }
  const Rgb seed = rgb_at(img, sx, sy);
  std::vector<std::pair<int, int>> queue{{sx, sy}};
  m.set(sx, sy);
  for (std::size_t i = 0; i < queue.size(); ++i) {
    const auto [x, y] = queue[i];
    for (const auto& [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int nx = x + dx;
      const int ny = y + dy;
      if (img.contains(nx, ny) && !m.get(nx, ny) && rgb_at(img, nx, ny) == seed) {
        m.set(nx, ny);
        queue.emplace_back(nx, ny);
      }
    }
  }
  return m;
}

TEST(MockSegmenter, MatchesComponentOracle) {
  std::mt19937_64 rng(3);
  const mock::FloodFillSegmenter seg(Rgb{0, 255, 0});
  for (int trial = 0; trial < 20; ++trial) {
    const RgbImage img = random_image(rng, 17, 13, 2);
    std::vector<Eigen::Vector2d> points;
    std::uniform_real_distribution<double> ux(0.0, 17.0);
    std::uniform_real_distribution<double> uy(0.0, 13.0);
    for (int i = 0; i < 8; ++i) {
      points.emplace_back(ux(rng), uy(rng));
    }
    const auto results = seg.run(img, points);
    ASSERT_EQ(results.size(), points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int x = static_cast<int>(points[i].x());
      const int y = static_cast<int>(points[i].y());
      EXPECT_EQ(results[i].mask, oracle_component(img, x, y, {0, 255, 0}));
      EXPECT_DOUBLE_EQ(results[i].confidence, 0.95);
    }
  }
}

TEST(MockSegmenter, BackgroundAndOutsidePointsGiveEmptyMasks) {
  const mock::FloodFillSegmenter seg;
  RgbImage img(6, 6);
  set_rgb(img, 3, 3, {9, 9, 9});
  const std::vector<Eigen::Vector2d> pts{{0.5, 0.5}, {-1.0, 2.0}, {3.2, 3.9}};
  const auto r = seg.run(img, pts);
  EXPECT_TRUE(r[0].mask.empty());
  EXPECT_TRUE(r[1].mask.empty());
  EXPECT_EQ(r[2].mask.count(), 1U);
}

TEST(MockFeatures, OneHotFollowsDominantColor) {
  const Rgb red{200, 40, 40};
  const Rgb blue{40, 40, 200};
  const mock::OneHotFeatureExtractor fx({red, blue}, 3, 2);
  RgbImage img(4, 4);
  BinaryMask mask(4, 4);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 4; ++x) {
      set_rgb(img, x, y, blue);
      mask.set(x, y);
    }
  }
  const auto out = fx.run(img, &mask);
  EXPECT_EQ(out.global, (Embedding{0, 1, 0}));
  ASSERT_EQ(out.patches.size(), 4U);
  EXPECT_EQ(out.patches[0], (Embedding{0, 1, 0}));
  EXPECT_EQ(out.patches[3], (Embedding{0, 0, 0}));  // no masked pixels in the cell
  const auto unmasked = fx.run(RgbImage(4, 4, 7));
  EXPECT_EQ(unmasked.global, (Embedding{0, 0, 1}));  // unknown color
  EXPECT_THROW(mock::OneHotFeatureExtractor({red, blue}, 2), Error);
}

TEST(MockFeatures, HashIsDeterministicAndInputSensitive) {
  std::mt19937_64 rng(5);
  const mock::HashFeatureExtractor fx(16, 3);
  const RgbImage a = random_image(rng, 12, 9, 4);
  RgbImage b = a;
  set_rgb(b, 4, 4, {1, 2, 3});
  EXPECT_EQ(fx.run(a), fx.run(a));
  EXPECT_NE(fx.run(a).global, fx.run(b).global);
  EXPECT_EQ(fx.run(a).patches.size(), 9U);
}

TEST(MockRenderer, SilhouetteIsProjectedCornerBox) {
  const mock::ProjectionRenderer r;
  RenderRequest req;
  req.object_id = 4;
  for (const double sx : {-1.0, 1.0}) {
    for (const double sy : {-1.0, 1.0}) {
      for (const double sz : {-1.0, 1.0}) {
        req.vertices.emplace_back(30 * sx, 20 * sy, 10 * sz);
      }
    }
  }
  req.distance_mm = 500;
  req.intrinsics = {160, 160, 64, 64};
  req.width = 128;
  req.height = 128;
  const auto out = r.run(req);
  // Nearest face z = 490 bounds the box: u = 160 * 30 / 490 + 64.
  const double u = 160.0 * 30.0 / 490.0;
  const double v = 160.0 * 20.0 / 490.0;
  EXPECT_NEAR(out.silhouette_bbox.x, 64 - u, 1e-9);
  EXPECT_NEAR(out.silhouette_bbox.y, 64 - v, 1e-9);
  EXPECT_NEAR(out.silhouette_bbox.w, 2 * u, 1e-9);
  EXPECT_NEAR(out.silhouette_bbox.h, 2 * v, 1e-9);
  EXPECT_EQ(rgb_at(out.image, 64, 64), r.color_for(4));
  EXPECT_EQ(rgb_at(out.image, 0, 0), (Rgb{}));
}

TEST(MockRenderer, RejectsEmptyVertexList) {
  const mock::ProjectionRenderer r;
  RenderRequest req;
  req.width = 8;
  req.height = 8;
  try {
    (void)r.run(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    EXPECT_EQ(e.stage(), "renderer");
  }
}

TEST(Backend, ForeignExceptionsAreTaggedWithStage) {
  class Throwing final : public Segmenter {
   public:
    Throwing() : Segmenter({BackendKind::kSegmenter, Implementation::kMock, {}, "boom", 1}) {}

   protected:
    std::vector<SegmentResult> do_run(const RgbImage&, std::span<const Eigen::Vector2d>) const override {
      throw std::runtime_error("boom");
    }
  };
  const Throwing t;
  try {
    (void)t.run(RgbImage(2, 2), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBackendFailure);
    EXPECT_EQ(e.stage(), "segmenter");
  }
}

TEST(Backend, PermitsBoundConcurrency) {
  class Counting final : public Enhancer {
   public:
    Counting() : Enhancer({BackendKind::kEnhancer, Implementation::kMock, {}, "count", 2}) {}
    mutable std::atomic<int> active{0};
    mutable std::atomic<int> peak{0};

   protected:
    RgbImage do_run(const RgbImage& image) const override {
      const int now = ++active;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active;
      return image;
    }
  };
  const Counting c;
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&] { (void)c.run(RgbImage(1, 1)); });
  }
  for (auto& t : threads) {
    t.join();
  }
  EXPECT_LE(c.peak.load(), 2);
}

TEST(Wire, Base64AndImageRoundtrip) {
  std::mt19937_64 rng(8);
  for (int n = 0; n < 10; ++n) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    for (auto& b : bytes) {
      b = static_cast<std::uint8_t>(rng());
    }
    EXPECT_EQ(wire::base64_decode(wire::base64_encode(bytes)), bytes);
  }
  EXPECT_EQ(wire::base64_encode(std::vector<std::uint8_t>{'f', 'o', 'o'}), "Zm9v");
  const RgbImage img = random_image(rng, 31, 7, 256);
  EXPECT_EQ(wire::decode_image(wire::encode_image(img)), img);
}

TEST(Wire, ResponseRoundtrips) {
  std::mt19937_64 rng(9);
  const RgbImage img = random_image(rng, 9, 5, 256);
  EXPECT_EQ(wire::parse_enhancer_response(wire::enhancer_response(img)), img);

  const std::vector<ScoredBox> boxes{{{0.1, 0.2, 3.3, 4.4}, 0.123456789012345}, {{5, 6, 7, 8}, 1.0}};
  EXPECT_EQ(wire::parse_roi_response(wire::json::parse(wire::roi_response(boxes).dump())), boxes);

  BinaryMask m(5, 4);
  m.fill_rect(1, 1, 2, 2);
  const std::vector<SegmentResult> segs{{m, 0.97}, {BinaryMask(5, 4), 0.5}};
  EXPECT_EQ(wire::parse_segmenter_response(wire::json::parse(wire::segmenter_response(segs).dump())),
            segs);

  FeatureOutput f;
  f.global = {0.1F, -0.25F, 3.0e-8F};
  f.patches = {{1, 2, 3}, {4, 5, 6}};
  f.grid_h = 1;
  f.grid_w = 2;
  EXPECT_EQ(wire::parse_feature_response(wire::json::parse(wire::feature_response(f).dump())), f);

  const RenderOutput r{img, {1.0 / 3.0, 2.5, 4, 1e-3}};
  EXPECT_EQ(wire::parse_renderer_response(wire::json::parse(wire::renderer_response(r).dump())), r);
}

TEST(Wire, MalformedPayloadsAreProtocolErrors) {
  const auto expect_protocol = [](auto&& f) {
    try {
      f();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kProtocol) << e.what();
    }
  };
  expect_protocol([] { (void)wire::parse_roi_response(wire::json{{"boxes", 3}}); });
  expect_protocol([] { (void)wire::parse_enhancer_response(wire::json::object()); });
  expect_protocol([] { (void)wire::parse_enhancer_response(wire::json{{"image_png_b64", "!!!"}}); });
  expect_protocol([] { (void)wire::parse_feature_response(wire::json{{"embedding", {1, 2}}}); });
  expect_protocol([] {
    (void)wire::parse_segmenter_response(
        wire::json{{"masks_rle", wire::json::array({{{"size", {2, 2}}, {"counts", {9}}}})},
                   {"confidences", {0.5}}});
  });
  expect_protocol([] { (void)wire::dispatch({}, wire::json{{"kind", "toaster"}}); });
}

BackendSet local_mocks() {
  const std::vector<Rgb> palette{{200, 40, 40}, {40, 40, 200}};
  return mock::make_default_set(palette, 3, {}, {{{2, 3, 10, 8}, 0.9}}, {});
}

BackendDescriptor remote_descriptor(BackendKind kind, const std::string& endpoint) {
  return {kind, Implementation::kRemote, endpoint, std::string(to_string(kind)), 4};
}

TEST(Loopback, RemoteAdaptersMatchLocalForEveryKind) {
  const BackendSet local = local_mocks();
  BackendService service(local);
  service.start();
  const std::string ep = service.endpoint();
  const BackendSet far = remote::make_remote_set(
      remote_descriptor(BackendKind::kEnhancer, ep), remote_descriptor(BackendKind::kRoiDetector, ep),
      remote_descriptor(BackendKind::kSegmenter, ep),
      remote_descriptor(BackendKind::kFeatureExtractor, ep),
      remote_descriptor(BackendKind::kRenderer, ep));

  std::mt19937_64 rng(10);
  const RgbImage img = random_image(rng, 24, 18, 3);
  EXPECT_EQ(far.enhancer->run(img), local.enhancer->run(img));
  EXPECT_EQ(far.roi_detector->run(img, "bin"), local.roi_detector->run(img, "bin"));
  const std::vector<Eigen::Vector2d> pts{{1.5, 2.5}, {10.25, 7.75}, {23.9, 17.1}};
  EXPECT_EQ(far.segmenter->run(img, pts), local.segmenter->run(img, pts));
  BinaryMask mask(24, 18);
  mask.fill_rect(3, 3, 9, 7);
  EXPECT_EQ(far.feature_extractor->run(img, &mask), local.feature_extractor->run(img, &mask));
  EXPECT_EQ(far.feature_extractor->run(img), local.feature_extractor->run(img));

  RenderRequest req;
  req.object_id = 2;
  req.vertices = {{-15, -25, -10}, {15, 25, 10}, {3, -7, 1}};
  req.rotation = sample_viewpoints(12)[5];
  req.distance_mm = 321.5;
  req.intrinsics = {160, 150, 64.5, 63.25};
  req.width = 40;
  req.height = 30;
  EXPECT_EQ(far.renderer->run(req), local.renderer->run(req));
  service.stop();
}

TEST(Loopback, ServerSideErrorsKeepTheirCode) {
  BackendService service(local_mocks());
  service.start();
  // A mask of a different size is rejected server-side as a dimension mismatch.
  wire::json req = wire::feature_request("x", RgbImage(4, 4), nullptr);
  req["mask_rle"] = wire::encode_rle(rle_encode(BinaryMask(3, 3)));
  const remote::HttpClient client(service.endpoint(), {});
  try {
    (void)client.post(req, "feature_extractor");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch) << e.what();
    EXPECT_EQ(e.stage(), "feature_extractor");
  }
}

TEST(Remote, NonJsonBodyIsProtocolError) {
  httplib::Server srv;
  srv.Post("/infer", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>not json</html>", "text/html");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  const remote::RemoteEnhancer far(
      remote_descriptor(BackendKind::kEnhancer, "http://127.0.0.1:" + std::to_string(port)));
  try {
    (void)far.run(RgbImage(2, 2));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProtocol);
    EXPECT_EQ(e.stage(), "enhancer");
  }
  srv.stop();
  t.join();
}

TEST(Remote, UnreachableEndpointIsUnavailableAfterRetries) {
  // Bind then release a port so nothing listens there.
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  ClientOptions opts;
  opts.timeout = std::chrono::milliseconds(500);
  opts.max_retries = 2;
  opts.retry_backoff = std::chrono::milliseconds(1);
  const remote::RemoteSegmenter far(
      remote_descriptor(BackendKind::kSegmenter, "http://127.0.0.1:" + std::to_string(port)), opts);
  try {
    (void)far.run(RgbImage(2, 2), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBackendUnavailable);
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.stage(), "segmenter");
  }
}

TEST(Descriptor, RemoteNeedsEndpoint) {
  BackendDescriptor d{BackendKind::kRenderer, Implementation::kRemote, std::nullopt, "tag", 1};
  EXPECT_THROW(validate(d), Error);
  d.endpoint = "http://localhost:1";
  EXPECT_NO_THROW(validate(d));
  d.model_tag.clear();
  EXPECT_THROW(validate(d), Error);
}

TEST(HttpStatus, ErrorCodesRoundTripThroughStatus) {
  EXPECT_EQ(wire::error_code_for_status(wire::http_status_for(ErrorCode::kBackendUnavailable)),
            ErrorCode::kBackendUnavailable);
  EXPECT_EQ(wire::error_code_for_status(wire::http_status_for(ErrorCode::kContractViolation)),
            ErrorCode::kContractViolation);
  EXPECT_EQ(wire::error_code_for_status(wire::http_status_for(ErrorCode::kProtocol)),
            ErrorCode::kProtocol);
}

}  // namespace
}  // namespace bindet
