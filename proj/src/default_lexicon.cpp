#include "retrocap/entity_filter.hpp"

namespace retrocap {

// Common nouns of everyday scene captions, singular lemmas, sorted.
const std::vector<std::string_view>& default_noun_lexicon() {
  static const std::vector<std::string_view> words = {
      "adult",
      "airplane",
      "airport",
      "animal",
      "apartment",
      "apple",
      "area",
      "audience",
      "baby",
      "background",
      "backpack",
      "bacon",
      "bag",
      "balcony",
      "ball",
      "banana",
      "banner",
      "barn",
      "base",
      "basket",
      "bat",
      "bathroom",
      "bathtub",
      "beach",
      "bear",
      "bed",
      "bedroom",
      "beer",
      "bench",
      "bicycle",
      "bike",
      "biker",
      "bird",
      "blanket",
      "blender",
      "boat",
      "book",
      "boot",
      "bottle",
      "bowl",
      "box",
      "boy",
      "bread",
      "breakfast",
      "bridge",
      "broccoli",
      "brother",
      "building",
      "bunch",
      "burger",
      "bus",
      "bush",
      "butterfly",
      "cabinet",
      "cable",
      "cafe",
      "cake",
      "calf",
      "camera",
      "candle",
      "canoe",
      "cap",
      "car",
      "card",
      "carpet",
      "carrot",
      "cart",
      "cat",
      "cattle",
      "ceiling",
      "cellphone",
      "chain",
      "chair",
      "cheese",
      "chef",
      "chicken",
      "child",
      "church",
      "city",
      "classroom",
      "cliff",
      "clock",
      "cloud",
      "coat",
      "coffee",
      "computer",
      "cone",
      "container",
      "cook",
      "cookie",
      "corner",
      "costume",
      "couch",
      "counter",
      "couple",
      "court",
      "cow",
      "crosswalk",
      "crowd",
      "cup",
      "curtain",
      "cyclist",
      "daughter",
      "deer",
      "desert",
      "desk",
      "dessert",
      "dinner",
      "dishwasher",
      "doctor",
      "dog",
      "doll",
      "donut",
      "door",
      "doughnut",
      "dress",
      "drink",
      "driver",
      "duck",
      "dugout",
      "eagle",
      "egg",
      "elephant",
      "engine",
      "family",
      "fan",
      "farm",
      "father",
      "fence",
      "field",
      "fireman",
      "fish",
      "flag",
      "flock",
      "floor",
      "flower",
      "fog",
      "food",
      "forest",
      "fork",
      "fountain",
      "fridge",
      "friend",
      "frisbee",
      "frog",
      "fruit",
      "game",
      "garage",
      "garden",
      "giraffe",
      "girl",
      "glass",
      "glasses",
      "glove",
      "goal",
      "goat",
      "goose",
      "grape",
      "grass",
      "group",
      "guy",
      "gym",
      "hallway",
      "hamburger",
      "handbag",
      "handle",
      "hat",
      "helicopter",
      "helmet",
      "herd",
      "highway",
      "hill",
      "home",
      "horse",
      "hospital",
      "hotdog",
      "hotel",
      "house",
      "hydrant",
      "ice",
      "intersection",
      "island",
      "jacket",
      "jar",
      "jersey",
      "jet",
      "juice",
      "kayak",
      "kettle",
      "keyboard",
      "kid",
      "kitchen",
      "kite",
      "kitten",
      "knife",
      "lady",
      "lake",
      "lamb",
      "lamp",
      "lane",
      "laptop",
      "lawn",
      "leaf",
      "lemon",
      "library",
      "light",
      "line",
      "lion",
      "lot",
      "luggage",
      "lunch",
      "magazine",
      "mall",
      "man",
      "market",
      "meal",
      "meat",
      "meter",
      "microwave",
      "milk",
      "mirror",
      "monitor",
      "monkey",
      "moon",
      "mother",
      "motorcycle",
      "mound",
      "mountain",
      "mouse",
      "mug",
      "museum",
      "napkin",
      "necklace",
      "net",
      "newspaper",
      "nurse",
      "ocean",
      "office",
      "officer",
      "onion",
      "orange",
      "oven",
      "owl",
      "painting",
      "pan",
      "paper",
      "park",
      "parking",
      "pasta",
      "path",
      "pedestrian",
      "pen",
      "pencil",
      "people",
      "pepper",
      "person",
      "phone",
      "photo",
      "picture",
      "pie",
      "pig",
      "pigeon",
      "pile",
      "pillow",
      "pizza",
      "plane",
      "plant",
      "plate",
      "platform",
      "player",
      "playground",
      "pole",
      "policeman",
      "pond",
      "pony",
      "pool",
      "porch",
      "post",
      "poster",
      "pot",
      "potato",
      "puppy",
      "purse",
      "rabbit",
      "racket",
      "railway",
      "rain",
      "refrigerator",
      "remote",
      "restaurant",
      "rice",
      "rider",
      "river",
      "road",
      "rock",
      "roof",
      "room",
      "rope",
      "row",
      "rug",
      "runway",
      "sailboat",
      "salad",
      "sand",
      "sandwich",
      "sausage",
      "scarf",
      "school",
      "scooter",
      "screen",
      "sculpture",
      "sea",
      "seagull",
      "seat",
      "sheep",
      "shelf",
      "ship",
      "shirt",
      "shoe",
      "shop",
      "shore",
      "shower",
      "sidewalk",
      "sign",
      "signal",
      "sink",
      "sister",
      "skateboard",
      "skateboarder",
      "ski",
      "skier",
      "sky",
      "skyscraper",
      "snow",
      "snowboard",
      "snowboarder",
      "sock",
      "sofa",
      "soldier",
      "son",
      "soup",
      "spoon",
      "squirrel",
      "stack",
      "stadium",
      "stair",
      "staircase",
      "station",
      "statue",
      "steak",
      "stone",
      "store",
      "stove",
      "strawberry",
      "street",
      "string",
      "student",
      "subway",
      "suit",
      "suitcase",
      "sun",
      "sunglasses",
      "surfboard",
      "surfer",
      "table",
      "tablet",
      "taxi",
      "tea",
      "teacher",
      "team",
      "teddy",
      "teenager",
      "television",
      "tent",
      "tie",
      "tiger",
      "tire",
      "toaster",
      "toddler",
      "toilet",
      "tomato",
      "tourist",
      "towel",
      "tower",
      "town",
      "toy",
      "track",
      "tractor",
      "trail",
      "trailer",
      "train",
      "tram",
      "tray",
      "tree",
      "trolley",
      "truck",
      "tunnel",
      "turtle",
      "tv",
      "umbrella",
      "uniform",
      "van",
      "vase",
      "vegetable",
      "vehicle",
      "village",
      "wagon",
      "waiter",
      "wall",
      "water",
      "wave",
      "wheel",
      "window",
      "wine",
      "wire",
      "woman",
      "wood",
      "worker",
      "yacht",
      "yard",
      "zebra",
      "zoo",
  };
  return words;
}

}  // namespace retrocap
