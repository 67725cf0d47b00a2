#pragma once

#include "basis_tools.hpp"
#include "errors.hpp"
#include "hierarchy.hpp"
#include "hierarchy_io.hpp"
#include "lambert_w.hpp"
#include "lifting.hpp"
#include "parallel.hpp"
#include "pyramid_io.hpp"
#include "sparse_denoise.hpp"
#include "spatial_basis.hpp"
#include "stat_glm.hpp"
#include "voxel_domain.hpp"
#include "vxl_io.hpp"
#include "wspm.hpp"
