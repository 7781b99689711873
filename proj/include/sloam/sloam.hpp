#pragma once

#include "sloam/core.hpp"
#include "sloam/scan.hpp"
#include "sloam/kitti.hpp"
#include "sloam/features.hpp"
#include "sloam/kdtree.hpp"
#include "sloam/matching.hpp"
#include "sloam/loss.hpp"
#include "sloam/estimation.hpp"
#include "sloam/mapping.hpp"
#include "sloam/evaluation.hpp"
#include "sloam/synthetic.hpp"
#include "sloam/ply.hpp"
#include "sloam/plot.hpp"
