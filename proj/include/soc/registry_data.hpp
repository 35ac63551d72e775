#pragma once

/**
 * @file registry_data.hpp
 * @brief Shipped default CVS registry (also available as data/cvs_registry.json).
 *
 * The three Critical View of Safety criteria, each decomposed into five
 * weighted verification checks spanning the four check categories. Check
 * content is configuration: edit the JSON asset to change it, the embedded
 * copy here only backs default_cvs_registry().
 */

#include <json.hpp>

#include "soc/registry.hpp"

namespace soc {

inline const char* kDefaultCvsRegistryJson = R"json({
  "version": "cvs-registry-1.0",
  "criteria": [
    {
      "criterion_id": 1,
      "title": "Two tubular structures",
      "statement": "Two and only two tubular structures are visible entering the gallbladder.",
      "decision_threshold": 0.5,
      "checks": [
        {
          "check_id": "c1_1",
          "question": "Are the cystic duct and cystic artery visible as distinct tubular structures?",
          "category": "anatomical-visibility",
          "weight": 0.2
        },
        {
          "check_id": "c1_2",
          "question": "Do exactly two tubular structures enter the gallbladder directly?",
          "category": "spatial-configuration",
          "weight": 0.2
        },
        {
          "check_id": "c1_3",
          "question": "Can any additional tubular structure coursing toward the gallbladder be excluded?",
          "category": "ambiguity-exclusion",
          "weight": 0.2
        },
        {
          "check_id": "c1_4",
          "question": "Is camera exposure adequate to distinguish tubular structures in the hepatocystic area?",
          "category": "occlusion-control",
          "weight": 0.2
        },
        {
          "check_id": "c1_5",
          "question": "Is the view of the two structures free of instrument obstruction?",
          "category": "occlusion-control",
          "weight": 0.2
        }
      ]
    },
    {
      "criterion_id": 2,
      "title": "Hepatocystic triangle clearance",
      "statement": "The hepatocystic triangle is cleared of fat and fibrous tissue.",
      "decision_threshold": 0.5,
      "checks": [
        {
          "check_id": "c2_1",
          "question": "Is the liver parenchyma visible through the cleared hepatocystic triangle?",
          "category": "anatomical-visibility",
          "weight": 0.2
        },
        {
          "check_id": "c2_2",
          "question": "Are the borders of the hepatocystic triangle dissected and clearly defined?",
          "category": "spatial-configuration",
          "weight": 0.2
        },
        {
          "check_id": "c2_3",
          "question": "Is the triangle free of residual fat or fibrous tissue that could conceal a structure?",
          "category": "ambiguity-exclusion",
          "weight": 0.2
        },
        {
          "check_id": "c2_4",
          "question": "Is exposure of the hepatocystic triangle sufficient, with the field of view centered on it?",
          "category": "occlusion-control",
          "weight": 0.2
        },
        {
          "check_id": "c2_5",
          "question": "Is the triangle free of instrument obstruction?",
          "category": "occlusion-control",
          "weight": 0.2
        }
      ]
    },
    {
      "criterion_id": 3,
      "title": "Lower third detached",
      "statement": "The lower third of the gallbladder is detached from the liver bed.",
      "decision_threshold": 0.5,
      "checks": [
        {
          "check_id": "c3_1",
          "question": "Is the cystic plate visible where the gallbladder has been separated from the liver?",
          "category": "anatomical-visibility",
          "weight": 0.2
        },
        {
          "check_id": "c3_2",
          "question": "Is at least the lower third of the gallbladder separated from the liver bed?",
          "category": "spatial-configuration",
          "weight": 0.2
        },
        {
          "check_id": "c3_3",
          "question": "Can remaining attachments between the lower gallbladder and the liver bed be excluded?",
          "category": "ambiguity-exclusion",
          "weight": 0.2
        },
        {
          "check_id": "c3_4",
          "question": "Is camera exposure and field of view adequate to assess the gallbladder-liver interface?",
          "category": "occlusion-control",
          "weight": 0.2
        },
        {
          "check_id": "c3_5",
          "question": "Is the gallbladder-liver interface free of instrument obstruction?",
          "category": "occlusion-control",
          "weight": 0.2
        }
      ]
    }
  ]
})json";

inline CheckRegistry default_cvs_registry() {
  return registry_from_json(nlohmann::json::parse(kDefaultCvsRegistryJson));
}

}  // namespace soc
