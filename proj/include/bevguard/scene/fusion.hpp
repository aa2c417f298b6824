#pragma once

#include <span>

#include "bevguard/scene/types.hpp"

namespace bevguard::scene {

/// Late fusion: union of all boxes followed by greedy NMS. Among boxes overlapping with
/// IoU > nms_iou the most confident survives; ego boxes win ties. Throws InputError on
/// frame mismatch.
DetectionSet fuse_late(const DetectionSet& ego, std::span<const DetectionSet> received, double nms_iou);

}  // namespace bevguard::scene
