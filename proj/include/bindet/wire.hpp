#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bindet/backends.hpp"

// JSON wire format shared by the remote adapters and BackendService.
//
// request:  {kind, model_tag, image_png_b64?, prompt?, points?, mask_rle?, render?}
// response: {image_png_b64? | boxes? | masks_rle? | embedding?+patches?+grid?,
//            confidence(s)?, bbox?}  or  {error: {code, message}}
//
// Images travel as base64 PNG so pixels survive bit-exactly; numbers are
// written with round-trip precision.
namespace bindet::wire {

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

json encode_image(const RgbImage& image);
RgbImage decode_image(const json& value);
json encode_rle(const Rle& rle);
Rle decode_rle(const json& value);

json enhancer_request(const std::string& model_tag, const RgbImage& image);
json roi_request(const std::string& model_tag, const RgbImage& image, const std::string& prompt);
json segmenter_request(const std::string& model_tag, const RgbImage& image,
                       std::span<const Eigen::Vector2d> points);
json feature_request(const std::string& model_tag, const RgbImage& image, const BinaryMask* mask);
json renderer_request(const std::string& model_tag, const RenderRequest& request);

json enhancer_response(const RgbImage& image);
json roi_response(const std::vector<ScoredBox>& boxes);
json segmenter_response(const std::vector<SegmentResult>& results);
json feature_response(const FeatureOutput& features);
json renderer_response(const RenderOutput& output);
json error_response(const Error& error);

// Parsers throw kProtocol on any schema violation.
RgbImage parse_enhancer_response(const json& response);
std::vector<ScoredBox> parse_roi_response(const json& response);
std::vector<SegmentResult> parse_segmenter_response(const json& response);
FeatureOutput parse_feature_response(const json& response);
RenderOutput parse_renderer_response(const json& response);

/// Decodes a request, runs it on the matching local backend and encodes the
/// result. Throws Error; the caller maps it to an error response.
json dispatch(const BackendSet& local, const json& request);

int http_status_for(ErrorCode code);
ErrorCode error_code_for_status(int status);

}  // namespace bindet::wire
