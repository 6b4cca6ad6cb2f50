#ifndef TTW_TTW_HPP
#define TTW_TTW_HPP

#include "ttw/analysis.hpp"
#include "ttw/dynamics.hpp"
#include "ttw/errors.hpp"
#include "ttw/model.hpp"
#include "ttw/polyint.hpp"

#endif  // TTW_TTW_HPP
