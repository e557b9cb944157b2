#ifndef MAPPRIOR_PNM_H_
#define MAPPRIOR_PNM_H_

#include <string>

#include "mapprior/augment.h"

namespace mapprior {

// Binary PGM (P5, 1 channel) and PPM (P6, 3 channels) with maxval 255.
ImageU8 ReadPnm(const std::string& path);
void WritePnm(const std::string& path, const ImageU8& image);

}  // namespace mapprior

#endif  // MAPPRIOR_PNM_H_
