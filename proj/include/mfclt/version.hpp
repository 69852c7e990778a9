#pragma once

#ifndef MFCLT_VERSION
#define MFCLT_VERSION "0.3.0"
#endif

namespace mfclt {

inline constexpr const char* version() { return MFCLT_VERSION; }

} // namespace mfclt
