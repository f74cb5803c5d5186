#pragma once

#define QMF_VERSION_MAJOR 0
#define QMF_VERSION_MINOR 1
#define QMF_VERSION_PATCH 0
#define QMF_VERSION_STRING "0.1.0"
