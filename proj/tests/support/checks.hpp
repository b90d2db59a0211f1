#pragma once

#include <doctest.h>

#include "starseg/error.hpp"

/// Checks that `expr` throws starseg::Error carrying `errc`.
#define CHECK_ERRC(expr, errc)                                              \
    do {                                                                    \
        bool starseg_thrown_ = false;                                       \
        try {                                                               \
            (void)(expr);                                                   \
        } catch (const starseg::Error& starseg_e_) {                        \
            starseg_thrown_ = true;                                         \
            CHECK_MESSAGE(starseg_e_.code() == (errc), starseg_e_.what());  \
        }                                                                   \
        CHECK_MESSAGE(starseg_thrown_, "expected " #errc " from " #expr);   \
    } while (false)
