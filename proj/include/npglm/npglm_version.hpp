#pragma once

#define NPGLM_VERSION_MAJOR 0
#define NPGLM_VERSION_MINOR 1
#define NPGLM_VERSION_PATCH 0
#define NPGLM_VERSION "0.1.0"
